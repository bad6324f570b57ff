fn main() {
    std::process::exit(orbital_forge::cli::run(std::env::args_os()));
}
