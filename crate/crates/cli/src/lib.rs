//! Command implementations behind the `gpdps` experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod config;
pub mod nash_cmd;
pub mod potts_cmd;
pub mod steps_cmd;
pub mod verify_cmd;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::{ArgMatches, CommandFactory, FromArgMatches};

use args::{Cli, Command};

/// Parses `argv` (program name first) and runs the command. Usage errors exit
/// the process with status 2.
pub fn run(argv: Vec<OsString>) -> ExitCode {
    let argv = match config::expand_args(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let matches = Cli::command().get_matches_from(argv);
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let header = header(name, sub);

    let outcome = match cli.command {
        Command::Potts(a) => potts_cmd::run(&a, header),
        Command::Nash(a) => nash_cmd::run(&a, header),
        Command::Steps(a) => steps_cmd::run(&a),
        Command::Verify(a) => verify_cmd::run(&a, header),
        Command::GenImage(a) => potts_cmd::gen_image(&a, header),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Version line, command and every argument with its effective value.
fn header(name: &str, m: &ArgMatches) -> Vec<String> {
    let mut lines = vec![format!("gpdps {}", gpdps::VERSION), format!("command = {name}")];
    let mut ids: Vec<&str> = m.ids().map(|id| id.as_str()).collect();
    ids.sort_unstable();
    for id in ids {
        if let Ok(Some(raw)) = m.try_get_raw(id) {
            let vals: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            lines.push(format!("{id} = {}", vals.join(" ")));
        }
    }
    lines
}
