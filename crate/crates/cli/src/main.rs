fn main() {
    std::process::exit(gradanom_cli::run());
}
