fn main() {
    std::process::exit(polariton::cli::run(std::env::args_os()));
}
