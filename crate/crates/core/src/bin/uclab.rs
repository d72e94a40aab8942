fn main() {
    std::process::exit(uclab::cli::run(std::env::args_os()));
}
