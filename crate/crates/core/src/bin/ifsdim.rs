fn main() {
    std::process::exit(ifsdim::cli::run(std::env::args_os()));
}
