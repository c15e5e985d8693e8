fn main() {
    std::process::exit(lpp_noise::cli::main_with_args(std::env::args_os()));
}
