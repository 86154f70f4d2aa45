fn main() {
    std::process::exit(chaos_ld::cli::main_with_args(std::env::args_os()));
}
