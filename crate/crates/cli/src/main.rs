fn main() {
    std::process::exit(inghamlab_cli::main_with_args(std::env::args_os()));
}
