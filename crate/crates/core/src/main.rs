fn main() {
    std::process::exit(kdspin::cli::main_with(std::env::args_os()));
}
