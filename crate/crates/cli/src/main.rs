fn main() {
    std::process::exit(crossel_cli::run_from(std::env::args_os()));
}
