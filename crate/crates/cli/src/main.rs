use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(strainveil_cli::run(std::env::args_os()))
}
