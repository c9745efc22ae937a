use std::process::ExitCode;

fn main() -> ExitCode {
    sda2e_cli::main_with_args(std::env::args_os())
}
