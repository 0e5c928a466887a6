fn main() {
    std::process::exit(gstam::cli::run(std::env::args_os()));
}
