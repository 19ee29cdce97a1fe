fn main() {
    std::process::exit(nvmag::experiments::cli_main(std::env::args_os()));
}
