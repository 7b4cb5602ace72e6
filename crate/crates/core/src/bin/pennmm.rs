fn main() {
    std::process::exit(pennmm::cli::main_with_args(std::env::args_os()));
}
