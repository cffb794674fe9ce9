fn main() {
    std::process::exit(emobias_cli::run(std::env::args_os()));
}
