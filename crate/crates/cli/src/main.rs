fn main() {
    std::process::exit(kiebm_cli::main_with_args(std::env::args_os()));
}
