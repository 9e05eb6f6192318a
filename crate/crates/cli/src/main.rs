fn main() {
    std::process::exit(ilim_cli::main_with_args(std::env::args_os()));
}
