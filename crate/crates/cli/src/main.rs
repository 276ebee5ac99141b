fn main() {
    std::process::exit(poststall_cli::run_cli(std::env::args_os()));
}
