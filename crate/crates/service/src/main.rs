fn main() {
    std::process::exit(polymodal::cli::main_with(std::env::args_os()));
}
