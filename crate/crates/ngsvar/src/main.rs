fn main() {
    std::process::exit(ngsvar::cli::run());
}
