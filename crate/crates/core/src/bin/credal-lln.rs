fn main() {
    std::process::exit(credal_lln::cli::main_with_args(std::env::args_os()));
}
