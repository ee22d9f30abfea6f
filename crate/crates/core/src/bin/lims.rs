fn main() {
    std::process::exit(lims::cli::run(std::env::args_os()));
}
