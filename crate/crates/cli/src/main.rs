use std::process::ExitCode;

fn main() -> ExitCode {
    ragatr_cli::run(std::env::args_os())
}
