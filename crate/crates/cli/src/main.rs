fn main() {
    std::process::exit(geoal_cli::run_cli(std::env::args_os()));
}
