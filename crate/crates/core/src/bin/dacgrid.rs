fn main() {
    std::process::exit(dacgrid::cli::main_with(std::env::args_os()));
}
