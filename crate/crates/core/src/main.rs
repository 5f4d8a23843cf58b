fn main() {
    std::process::exit(multisense::cli::main());
}
