fn main() {
    std::process::exit(compact_tik_cli::run(std::env::args_os()));
}
