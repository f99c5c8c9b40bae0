use std::process::ExitCode;

fn main() -> ExitCode {
    shadowbench::cli::main_with(std::env::args_os())
}
