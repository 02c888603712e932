fn main() {
    std::process::exit(fourier_density::cli::run(std::env::args_os()));
}
