fn main() {
    std::process::exit(birs::cli::cli_main(std::env::args().collect()));
}
