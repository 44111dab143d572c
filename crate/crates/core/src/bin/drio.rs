fn main() {
    std::process::exit(drio::cli::main());
}
