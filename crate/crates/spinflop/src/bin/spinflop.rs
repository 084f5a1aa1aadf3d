use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spinflop::runner::{self, ExperimentKind, Overrides};

/// Experiment runner for decimated-rotator hidden-spin models.
#[derive(Parser)]
#[command(name = "spinflop", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory from the config.
    #[arg(long)]
    outdir: Option<PathBuf>,
    /// Worker threads; the default of 1 keeps runs sequential.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the effective field induced by the frozen visible spins.
    FieldMap(RunArgs),
    /// Evaluate the diluted-field series against twice Catalan's constant.
    CatalanCheck(RunArgs),
    /// Solve for the mostly-East / mostly-West ground-state pair.
    GroundState(RunArgs),
    /// Sample one observable of the dressed constrained box.
    Sample(RunArgs),
    /// Magnetisation histogram over independent chains.
    Histogram(RunArgs),
    /// Conditional-expectation gap between the ME and MW dressings.
    GapProbe(RunArgs),
    /// Smallest Hessian eigenvalue, constrained vs unconstrained.
    SpectralGap(RunArgs),
    /// Check a config against every precondition without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, expect) = match &cli.command {
        Command::FieldMap(a) => (a, ExperimentKind::FieldMap),
        Command::CatalanCheck(a) => (a, ExperimentKind::CatalanCheck),
        Command::GroundState(a) => (a, ExperimentKind::GroundState),
        Command::Sample(a) => (a, ExperimentKind::Sample),
        Command::Histogram(a) => (a, ExperimentKind::Histogram),
        Command::GapProbe(a) => (a, ExperimentKind::GapProbe),
        Command::SpectralGap(a) => (a, ExperimentKind::SpectralGap),
        Command::Validate { config } => {
            return match runner::validate(config) {
                Ok(violations) if violations.is_empty() => {
                    println!("ok");
                    ExitCode::SUCCESS
                }
                Ok(violations) => {
                    for v in &violations {
                        eprintln!("violation: {v}");
                    }
                    ExitCode::FAILURE
                }
                Err(e) => fail(&e),
            };
        }
    };

    #[cfg(feature = "parallel")]
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads)
            .build_global()
        {
            eprintln!("thread pool: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = args.threads;

    let overrides = Overrides {
        outdir: args.outdir.clone(),
        expect: Some(expect),
    };
    match runner::run(&args.config, &overrides) {
        Ok(out) => {
            println!("{}", out.dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

/// Machine-readable failure on stdout, nonzero exit.
fn fail(e: &spinflop::Error) -> ExitCode {
    let payload = serde_json::json!({ "error": e.to_string() });
    println!("{payload}");
    ExitCode::FAILURE
}
