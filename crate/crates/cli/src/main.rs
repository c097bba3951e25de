fn main() {
    std::process::exit(isi_cli::main_with_args(std::env::args_os()));
}
