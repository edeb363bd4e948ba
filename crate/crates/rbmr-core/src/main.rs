fn main() {
    std::process::exit(rbmr_core::cli::run());
}
