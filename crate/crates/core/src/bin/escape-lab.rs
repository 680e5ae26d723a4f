fn main() {
    std::process::exit(escape_lab::cli::run(std::env::args_os()));
}
