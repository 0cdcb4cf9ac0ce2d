fn main() {
    std::process::exit(floquet_metrology::cli::main_with_args(std::env::args_os()));
}
