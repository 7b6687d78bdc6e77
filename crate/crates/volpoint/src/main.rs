fn main() {
    std::process::exit(volpoint::cli::run(std::env::args()));
}
