use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(v2n::cli::dispatch(std::env::args_os()) as u8)
}
