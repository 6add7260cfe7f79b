use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(headlamp::cli::run(std::env::args_os()))
}
