fn main() {
    std::process::exit(cpa_harness::cli::run(std::env::args_os()));
}
