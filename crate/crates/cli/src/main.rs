fn main() {
    std::process::exit(lattice_wave_cli::run_cli(std::env::args_os()));
}
