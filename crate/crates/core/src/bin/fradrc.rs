fn main() {
    std::process::exit(fradrc::cli::run(std::env::args_os()));
}
