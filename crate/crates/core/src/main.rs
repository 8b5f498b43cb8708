fn main() {
    std::process::exit(polarwave::cli::run(std::env::args_os()));
}
