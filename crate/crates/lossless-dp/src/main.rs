fn main() {
    std::process::exit(lossless_dp::cli::run(std::env::args_os()));
}
