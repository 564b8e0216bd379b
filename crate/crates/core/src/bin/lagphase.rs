fn main() {
    std::process::exit(lagphase::cli::run(std::env::args_os()));
}
