fn main() {
    std::process::exit(dgt_cli::main_with_args(std::env::args_os()));
}
