fn main() {
    std::process::exit(dayahead::cli::run(std::env::args_os()));
}
