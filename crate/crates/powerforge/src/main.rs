fn main() {
    std::process::exit(powerforge::cli::run(std::env::args_os()));
}
