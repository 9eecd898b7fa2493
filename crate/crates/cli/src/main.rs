fn main() {
    std::process::exit(mimo_sic_cli::main_with(std::env::args_os()));
}
