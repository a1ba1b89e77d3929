fn main() {
    std::process::exit(dcor_embed::cli::main_with_args(std::env::args_os()));
}
