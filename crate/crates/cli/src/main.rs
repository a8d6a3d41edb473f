use std::process::ExitCode;

fn main() -> ExitCode {
    ldscope_cli::main_with(std::env::args_os())
}
