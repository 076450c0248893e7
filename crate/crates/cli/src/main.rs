fn main() {
    std::process::exit(cavmem_cli::main_with_args(std::env::args_os()));
}
