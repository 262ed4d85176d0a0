fn main() {
    std::process::exit(ict_core::cli::run(std::env::args_os()));
}
