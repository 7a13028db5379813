fn main() {
    std::process::exit(parmono_cli::run(std::env::args_os()));
}
