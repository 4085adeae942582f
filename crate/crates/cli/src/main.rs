fn main() {
    std::process::exit(gupphase_cli::run(std::env::args_os()));
}
