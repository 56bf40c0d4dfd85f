fn main() {
    std::process::exit(hbmflow_cli::run(std::env::args_os()));
}
