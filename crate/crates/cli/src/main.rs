mod args;
mod commands;
mod profiles;
mod timeparse;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::{CmdStatus, Ctx};

/// Exit codes: 0 success, 1 validation/input error, 2 numerical
/// non-convergence (artifacts still written), 64 usage error.
fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    let threads = cli.threads.or_else(|| {
        std::env::var("PHOTONSTAT_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }

    let ctx = Ctx {
        seed: cli.seed,
        quiet: cli.quiet,
    };
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate_cmd(&ctx, a),
        Command::G2(a) => commands::g2_cmd(&ctx, a),
        Command::Decay(a) => commands::decay_cmd(&ctx, a),
        Command::Satfit(a) => commands::satfit_cmd(&ctx, a),
        Command::Blink(a) => commands::blink_cmd(&ctx, a),
        Command::Flid(a) => commands::flid_cmd(&ctx, a),
        Command::Spectrum(a) => commands::spectrum_cmd(&ctx, a),
        Command::Cohort(a) => commands::cohort_cmd(&ctx, a),
        Command::Repro(a) => commands::repro_cmd(&ctx, a),
        Command::Convert(a) => commands::convert_cmd(&ctx, a),
    };
    match result {
        Ok(CmdStatus::Ok) => ExitCode::SUCCESS,
        Ok(CmdStatus::NonConverged) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
