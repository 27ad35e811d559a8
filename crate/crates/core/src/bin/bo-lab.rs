fn main() {
    std::process::exit(bo_lab::harness::cli::run(std::env::args_os()));
}
