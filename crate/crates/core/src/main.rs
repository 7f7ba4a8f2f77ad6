fn main() {
    std::process::exit(cproj_twistor::cli::main_with_args(std::env::args_os()));
}
