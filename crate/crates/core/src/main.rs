fn main() {
    std::process::exit(creditlens::cli::run_command(std::env::args()));
}
