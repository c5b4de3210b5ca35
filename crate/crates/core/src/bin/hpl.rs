fn main() {
    std::process::exit(hpl::cli::run(std::env::args_os()));
}
