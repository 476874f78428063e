fn main() {
    std::process::exit(smallobs_cli::run(std::env::args_os()));
}
