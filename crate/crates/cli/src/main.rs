fn main() -> std::process::ExitCode {
    tfe10_cli::main_with_args(std::env::args_os())
}
