fn main() {
    std::process::exit(push_lsvrg::cli::run_cli(std::env::args_os()));
}
