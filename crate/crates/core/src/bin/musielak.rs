fn main() {
    std::process::exit(musielak::cli::main_with_args(std::env::args_os()));
}
