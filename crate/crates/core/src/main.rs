fn main() {
    std::process::exit(pprd::cli::main_with_args(std::env::args_os()));
}
