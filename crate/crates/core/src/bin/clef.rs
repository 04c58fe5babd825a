fn main() {
    let code = clef::cli::main_with(std::env::args().collect(), std::env::var("CLEF_SEED").ok());
    std::process::exit(code);
}
