fn main() {
    std::process::exit(maxsmooth_cli::main_with(std::env::args_os()));
}
