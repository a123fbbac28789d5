fn main() {
    std::process::exit(pbtlab::cli::main_with_args(std::env::args_os()));
}
