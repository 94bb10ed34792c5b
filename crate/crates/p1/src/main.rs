fn main() {
    std::process::exit(p1::cli::run());
}
