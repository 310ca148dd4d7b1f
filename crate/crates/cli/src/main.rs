fn main() {
    std::process::exit(cqe_cli::run(std::env::args_os()));
}
