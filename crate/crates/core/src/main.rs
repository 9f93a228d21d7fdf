use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let mut out = io::stdout().lock();
    let mut err = io::stderr();
    ExitCode::from(qleak::cli::main_with(std::env::args_os(), &mut out, &mut err))
}
