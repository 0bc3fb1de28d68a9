fn main() {
    std::process::exit(sigkin::cli::run_command(std::env::args_os()));
}
