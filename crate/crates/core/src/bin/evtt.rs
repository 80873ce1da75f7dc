fn main() {
    std::process::exit(evtt::cli::run(std::env::args_os()));
}
