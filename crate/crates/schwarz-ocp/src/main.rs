fn main() {
    std::process::exit(schwarz_ocp::cli::run());
}
