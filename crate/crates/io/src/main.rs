fn main() {
    std::process::exit(helmholtz_io::cli::run(std::env::args_os()));
}
