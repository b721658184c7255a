fn main() {
    std::process::exit(qclab::cli::run(std::env::args_os()));
}
