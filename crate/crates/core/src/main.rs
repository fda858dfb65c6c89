fn main() {
    std::process::exit(tempered::cli::main_with_args(std::env::args_os()));
}
