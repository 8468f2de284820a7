fn main() {
    std::process::exit(aml_core::cli::run(std::env::args_os()));
}
