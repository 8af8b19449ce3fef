fn main() {
    std::process::exit(chanadapt_cli::run(std::env::args_os()));
}
