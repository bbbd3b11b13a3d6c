fn main() {
    std::process::exit(misreport::run_cli(std::env::args_os()));
}
