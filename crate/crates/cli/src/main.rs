fn main() {
    std::process::exit(wind_cli::run_command(std::env::args_os()));
}
