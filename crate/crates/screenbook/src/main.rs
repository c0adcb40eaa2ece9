fn main() {
    std::process::exit(screenbook::cli::run(std::env::args_os()));
}
