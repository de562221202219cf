fn main() {
    std::process::exit(oltr_sim::cli::main());
}
