// `!(x < y)` is used on purpose to reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos;
pub mod cli;
pub mod gaussian;
pub mod kernels;
pub mod observables;
pub mod quadrature;
pub mod report;
pub mod sampler;
pub mod solver;
pub mod special;
pub mod stats;
pub mod wick;
