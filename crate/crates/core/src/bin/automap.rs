fn main() {
    std::process::exit(automap::cli::run(std::env::args_os()));
}
