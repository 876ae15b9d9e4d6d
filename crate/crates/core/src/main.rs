use std::process::ExitCode;

fn main() -> ExitCode {
    scldmd::cli::main_with_args(std::env::args_os())
}
