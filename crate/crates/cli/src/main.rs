fn main() {
    std::process::exit(geovlm_cli::run(std::env::args_os()));
}
