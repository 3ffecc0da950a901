fn main() {
    std::process::exit(translator_core::cli::run_from(std::env::args_os()));
}
