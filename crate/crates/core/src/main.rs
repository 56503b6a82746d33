//! Command-line front end for the experiment harness.
//!
//! Every subcommand takes the same flags and feeds them through the spec
//! resolution in [`airnoma::harness`]:
//!
//! ```text
//! airnoma <train|eval|sweep|mse-verify|fl>
//!     [--spec <file.toml>]          experiment spec file
//!     [--seed <u64>]                master seed (overrides the file)
//!     [--out <dir>]                 output directory (overrides the file)
//!     [--override key=value]...     dotted-path patches, applied in order
//! ```
//!
//! Exit codes: 0 on success, 1 on any validation/parse/runtime error,
//! 2 when the run finished but a verification gate failed.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use airnoma::harness::{self, Kind};

#[derive(Parser)]
#[command(
    name = "airnoma",
    version,
    about = "Simulator and optimization harness for a fluid-antenna uplink \
             shared by NOMA data users and over-the-air federated learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the recurrent policy-gradient agent and write a checkpoint.
    Train(RunArgs),
    /// Roll out a trained checkpoint without exploration noise.
    Eval(RunArgs),
    /// Sweep a system parameter across values, port counts and modes.
    Sweep(RunArgs),
    /// Verify closed-form MSE/received power against Monte Carlo.
    MseVerify(RunArgs),
    /// Run federated learning over an ideal or analog uplink.
    Fl(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment spec file (TOML). Missing tables come from the preset.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Master seed. Required here or in the spec file — there is no
    /// default seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for all result files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted-path patch, e.g. `system.num_ports=4` (repeatable; applied
    /// after the spec file, before --seed/--out).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };

    let (kind, args) = match cli.command {
        Command::Train(args) => (Kind::Train, args),
        Command::Eval(args) => (Kind::Eval, args),
        Command::Sweep(args) => (Kind::Sweep, args),
        Command::MseVerify(args) => (Kind::MseVerify, args),
        Command::Fl(args) => (Kind::Fl, args),
    };

    let spec = match harness::resolve_spec(
        Some(kind),
        args.spec.as_deref(),
        &args.overrides,
        args.seed,
        args.out.as_deref(),
    ) {
        Ok(spec) => spec,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    match harness::run(&spec) {
        Ok(report) => {
            println!("{}", report.summary);
            for file in &report.outputs {
                println!("  {}", report.out_dir.join(file).display());
            }
            if report.gate_passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("verification gate failed (see result files)");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
