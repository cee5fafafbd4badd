fn main() {
    std::process::exit(fockfit::cli::run(std::env::args_os()));
}
