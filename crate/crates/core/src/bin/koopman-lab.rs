fn main() {
    std::process::exit(koopman_lab::cli::run(std::env::args_os()));
}
