mod args;
mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Globals;
use output::{Failure, Outputs, EXIT_USAGE};

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::internal)?;
    }
    let out = Outputs::new(&cli.out_dir)?;
    let g = Globals {
        seed: cli.seed,
        out: &out,
    };
    match &cli.command {
        Command::Generate(a) => commands::generate_cmd(a, &g),
        Command::Decompose(a) => commands::decompose_cmd(a, &g),
        Command::Select(a) => commands::select_cmd(a, &g),
        Command::Evaluate(a) => commands::evaluate_cmd(a, &g),
        Command::Ensemble(a) => commands::ensemble_cmd(a, &g),
        Command::Report(a) => commands::report_cmd(a, &g),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version requests go to stdout and are not errors
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
