fn main() {
    std::process::exit(pairwise_opinion::harness::cli::run(std::env::args_os()));
}
