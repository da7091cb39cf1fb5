fn main() {
    std::process::exit(karlin_core::cli::run(std::env::args_os()));
}
