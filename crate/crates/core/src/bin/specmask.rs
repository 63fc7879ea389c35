fn main() {
    std::process::exit(specmask::cli::run(std::env::args_os()));
}
