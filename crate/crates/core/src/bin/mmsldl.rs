fn main() {
    std::process::exit(mmsldl::cli::main_with_args(std::env::args_os()));
}
