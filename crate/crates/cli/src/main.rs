fn main() {
    std::process::exit(thinlab_cli::run_cli(std::env::args_os()));
}
