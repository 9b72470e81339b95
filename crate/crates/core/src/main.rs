fn main() {
    std::process::exit(coopcast::cli::run(std::env::args_os()));
}
