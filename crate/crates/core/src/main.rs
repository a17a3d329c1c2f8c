fn main() {
    std::process::exit(idd_decay::cli::main_with(std::env::args_os()));
}
