fn main() {
    std::process::exit(singfde_cli::run(std::env::args_os()));
}
