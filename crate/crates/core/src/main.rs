fn main() {
    std::process::exit(hdbell::cli::run_from(std::env::args_os()));
}
