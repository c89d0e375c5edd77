fn main() {
    std::process::exit(plapsys_core::cli::main_with_args(std::env::args_os()));
}
