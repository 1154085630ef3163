fn main() {
    std::process::exit(divsum::cli::run(std::env::args_os()));
}
