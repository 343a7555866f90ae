fn main() {
    std::process::exit(homog_lab::cli::run(std::env::args_os()));
}
