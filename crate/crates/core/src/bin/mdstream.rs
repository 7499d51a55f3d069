fn main() {
    std::process::exit(mdstream::cli::run_cli(std::env::args_os()));
}
