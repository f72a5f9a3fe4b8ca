use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(noncollapse_cli::run(std::env::args_os()))
}
