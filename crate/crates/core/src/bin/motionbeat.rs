fn main() {
    std::process::exit(motionbeat::cli::run_cli(std::env::args_os()));
}
