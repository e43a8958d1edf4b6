fn main() {
    std::process::exit(dvpp::cli::cli_main(std::env::args_os()));
}
