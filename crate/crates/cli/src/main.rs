fn main() {
    std::process::exit(mvtreelet_cli::main_with_args(std::env::args_os()));
}
