fn main() {
    std::process::exit(elliptic_amp::cli::run());
}
