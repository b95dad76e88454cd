use std::process::ExitCode;

fn main() -> ExitCode {
    lari_cli::main_with(std::env::args_os())
}
