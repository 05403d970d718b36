fn main() {
    qposer_cli::init_logging();
    std::process::exit(qposer_cli::run(std::env::args_os()));
}
