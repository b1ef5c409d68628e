fn main() {
    std::process::exit(hyplab_cli::run(std::env::args_os()));
}
