fn main() {
    std::process::exit(cqsurrogate::cli::run(std::env::args_os()));
}
