fn main() {
    std::process::exit(hadwish::cli::run(std::env::args_os()));
}
