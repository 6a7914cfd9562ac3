fn main() {
    std::process::exit(nlslab_cli::parse_and_dispatch(std::env::args_os()));
}
