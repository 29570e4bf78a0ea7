fn main() {
    std::process::exit(phase_speckle::cli::main_with_args(std::env::args_os()));
}
