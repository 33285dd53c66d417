use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(detpipe::cli::run())
}
