fn main() {
    std::process::exit(sls::cli::main_with_args(std::env::args_os()));
}
