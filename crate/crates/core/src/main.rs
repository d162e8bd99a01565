fn main() {
    std::process::exit(ensemble_feedback::cli::run(std::env::args_os()));
}
