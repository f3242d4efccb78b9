fn main() {
    std::process::exit(seispost::cli::run_cli(std::env::args_os()));
}
