fn main() {
    std::process::exit(debtcast::cli::main());
}
