fn main() {
    std::process::exit(lrising::cli::main_with_args(std::env::args_os()));
}
