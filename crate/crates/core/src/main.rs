fn main() {
    std::process::exit(frontlim::cli::main_with_args(std::env::args_os()));
}
