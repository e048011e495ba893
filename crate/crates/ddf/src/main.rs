fn main() {
    std::process::exit(ddf::cli::run(std::env::args_os()));
}
