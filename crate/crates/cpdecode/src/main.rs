use std::process::ExitCode;

fn main() -> ExitCode {
    cpdecode::cli::main_with_args(std::env::args_os())
}
