fn main() {
    std::process::exit(bosonic_id::cli::run(std::env::args_os()));
}
