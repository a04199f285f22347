fn main() {
    std::process::exit(qrotor_cli::run(std::env::args_os()));
}
