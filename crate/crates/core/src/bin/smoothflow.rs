fn main() {
    std::process::exit(smoothflow::harness::cli_main(std::env::args_os()));
}
