fn main() {
    std::process::exit(dumbbell_spectra::cli::run(std::env::args_os()));
}
