fn main() {
    std::process::exit(zeroscope::cli::run(std::env::args_os()));
}
