fn main() {
    std::process::exit(pemwe_core::cli::run(std::env::args_os()));
}
