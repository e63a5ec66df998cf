fn main() {
    std::process::exit(kaczmarz::cli::cli_main(std::env::args_os()));
}
