use std::process::ExitCode;

fn main() -> ExitCode {
    sigfree::cli::main_with_args(std::env::args_os())
}
