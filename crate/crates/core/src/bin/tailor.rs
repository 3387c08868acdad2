fn main() {
    std::process::exit(tailor::cli::main_with_args(std::env::args_os()));
}
