fn main() {
    std::process::exit(goursat_cli::run_from(std::env::args_os()));
}
