mod args;
mod commands;
mod exit;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(exit::USAGE as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run { state, common } => commands::run(state, common),
        Command::Chart { spec, common } => commands::chart(spec, common),
        Command::Volumetry {
            sampler,
            n_ppt,
            count_only,
            common,
        } => commands::volumetry_cmd(sampler, n_ppt, count_only, common),
        Command::Dynamics {
            state,
            synthetic,
            synthetic_len,
            checkpoint_every,
            common,
        } => commands::dynamics(state, synthetic, synthetic_len, checkpoint_every, common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
