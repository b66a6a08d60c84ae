fn main() {
    std::process::exit(edgecap::cli::run(std::env::args_os()));
}
