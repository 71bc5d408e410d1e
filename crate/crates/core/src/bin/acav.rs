fn main() {
    std::process::exit(acav::cli::main_with_args(std::env::args_os()));
}
