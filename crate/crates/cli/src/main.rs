use std::process::ExitCode;

fn main() -> ExitCode {
    gpdps_cli::run(std::env::args_os().collect())
}
