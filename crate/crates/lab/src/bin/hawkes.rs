fn main() {
    std::process::exit(hawkes_lab::cli::main_with_args(std::env::args_os()));
}
