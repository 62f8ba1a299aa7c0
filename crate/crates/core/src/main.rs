fn main() {
    std::process::exit(cflow::cli::run(std::env::args_os()));
}
