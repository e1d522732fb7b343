use std::process::ExitCode;

use borell_lab::harness::{builtin, BUILTIN_HELP};
use borell_lab::report::{
    cmd_borell, cmd_sweep, cmd_verify, dump_scenario, exit_code, parse_range, parse_tau_list, BorellArgs, Format,
    PolicyChoice, RunRecord, SweepArgs, VerifyArgs,
};
use borell_lab::rng::DEFAULT_SEED;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "borell-lab", version, about = "Stochastic-control and functional-inequality laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Optimal,
    Zero,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file or builtin: conditions, assumption, conclusion.
    Verify {
        scenario: String,
        /// Comma-separated τ values (or `flat`) for the sweep; bare flag disables it.
        #[arg(long, num_args = 0..=1, default_missing_value = "")]
        tau: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Relative tolerance of the conclusion.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Compare quadrature with Monte Carlo for −log P_T e^{-f}(0).
    Borell {
        /// half-square[:n], const:C[:n], double-well, or a JSON function file.
        function: String,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 256)]
        steps: usize,
        #[arg(long, default_value_t = 20_000)]
        paths: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value = "both")]
        policy: PolicyArg,
        /// Tolerance in standard errors.
        #[arg(long, default_value_t = 3.0)]
        tol: f64,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Tabulate margins over an exotic (b, ε) grid or a τ grid.
    Sweep {
        /// Scenario for a τ sweep.
        scenario: Option<String>,
        /// Exotic grid `start:end:count`.
        #[arg(long)]
        b: Option<String>,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long, num_args = 0..=1, default_missing_value = "")]
        tau: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Print a builtin as a scenario file.
    DumpBuiltin { name: String },
    /// List builtin scenarios.
    ListBuiltins,
}

fn format(f: FormatArg) -> Format {
    match f {
        FormatArg::Text => Format::Text,
        FormatArg::Csv => Format::Csv,
    }
}

fn run(cli: Cli) -> borell_lab::Result<Option<(RunRecord, Format)>> {
    Ok(match cli.command {
        Command::Verify { scenario, tau, samples, seed, tol, format: f } => {
            let args = VerifyArgs {
                target: scenario,
                tau: tau.as_deref().map(parse_tau_list).transpose()?,
                samples,
                seed,
                tol,
            };
            Some((cmd_verify(&args)?, format(f)))
        }
        Command::Borell { function, horizon, steps, paths, seed, policy, tol, format: f } => {
            let policy = match policy {
                PolicyArg::Optimal => PolicyChoice::Optimal,
                PolicyArg::Zero => PolicyChoice::Zero,
                PolicyArg::Both => PolicyChoice::Both,
            };
            let args = BorellArgs { function, horizon, steps, paths, seed, policy, tol };
            Some((cmd_borell(&args)?, format(f)))
        }
        Command::Sweep { scenario, b, eps, tau, samples, seed, tol, format: f } => {
            let args = SweepArgs {
                target: scenario,
                b: b.as_deref().map(parse_range).transpose()?,
                eps: eps.as_deref().map(parse_range).transpose()?,
                tau: tau.as_deref().map(parse_tau_list).transpose()?,
                samples,
                seed,
                tol,
            };
            Some((cmd_sweep(&args)?, format(f)))
        }
        Command::DumpBuiltin { name } => {
            print!("{}", dump_scenario(&builtin(&name)?));
            None
        }
        Command::ListBuiltins => {
            for (name, about) in BUILTIN_HELP {
                println!("{name:<34}{about}");
            }
            None
        }
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some((record, f))) => {
            print!("{}", record.render(f));
            ExitCode::from(if record.pass { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
