fn main() {
    std::process::exit(predbs::cli::run(std::env::args_os()));
}
