fn main() {
    std::process::exit(aerobeam::harness::cli::main_with_args(std::env::args_os()));
}
