fn main() {
    std::process::exit(planetary::cli::run(std::env::args()));
}
