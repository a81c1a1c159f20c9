fn main() {
    std::process::exit(dcsca_cli::run_cli(std::env::args_os()));
}
