fn main() {
    std::process::exit(latentsig::cli::run(std::env::args_os()));
}
