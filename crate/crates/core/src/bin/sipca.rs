fn main() {
    std::process::exit(sipca::cli::main_with_args(std::env::args_os()));
}
