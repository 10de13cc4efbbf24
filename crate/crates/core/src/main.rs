fn main() {
    std::process::exit(posthoc::cli_main(std::env::args_os()));
}
