//! Command-line entry point: run single experiments, parameter sweeps, and
//! the acceptance suite from declarative TOML config files.
//!
//! Exit code 0 means every checked invariant held; 1 means the run finished
//! but an invariant or acceptance criterion failed; 2 means the run could
//! not be executed (bad config, I/O, solver abort).

use clap::{Args, Parser, Subcommand};
use critnls::config::{self, Experiment};
use critnls::run as runner;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "critnls",
    version,
    about = "Numerical toolkit for NLS with a critically decaying harmonic potential"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the config's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel jobs for sweeps; single runs are sequential in time.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Dotted-path config override, e.g. --override solver.t_max=100.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Fundamental-solution trajectories, matching and structural checks.
    Zeta(RunArgs),
    /// Linear propagation via the factorized propagator; decay-law fit.
    Propagate(RunArgs),
    /// Full nonlinear split-step evolution with diagnostics.
    Evolve(RunArgs),
    /// Evolution plus scattering-profile extraction and inequality checks.
    Scatter(RunArgs),
    /// Short/long-range threshold classification.
    Classify(RunArgs),
    /// Fractional-Leibniz ratio scan over a random band-limited corpus.
    Leibniz(RunArgs),
    /// Parameter sweep: rerun the config across values of one field.
    Sweep {
        #[command(flatten)]
        args: RunArgs,
        /// Dotted path of the field to vary, e.g. params.epsilon or solver.t_max.
        #[arg(long)]
        axis: String,
        /// Comma-separated values for the axis.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Run the full acceptance suite and emit one pass/fail line each.
    Acceptance(RunArgs),
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>, critnls::Error> {
    raw.iter().map(|s| config::split_override(s)).collect()
}

fn single_run(args: &RunArgs, experiment: Option<Experiment>) -> Result<bool, critnls::Error> {
    let overrides = parse_overrides(&args.overrides)?;
    let (mut cfg, mut canonical) = config::load(&args.config, &overrides)?;
    if let Some(exp) = experiment {
        if cfg.experiment != exp {
            // the subcommand wins over the config's experiment field
            let mut ov = overrides.clone();
            ov.push((
                "experiment".to_string(),
                format!("\"{}\"", exp.as_str()),
            ));
            (cfg, canonical) = config::load(&args.config, &ov)?;
        }
    }
    let out = args.out.clone().unwrap_or_else(|| cfg.output.clone());
    let report = runner::run(&cfg, &canonical, &out)?;
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    for failure in &report.failures {
        eprintln!("invariant violated: {failure}");
    }
    println!(
        "{}: {} in {:.1}s -> {}",
        cfg.experiment.as_str(),
        if report.ok { "ok" } else { "FAILED" },
        report.wall_seconds,
        out.display()
    );
    for (k, v) in &report.headline {
        println!("  {k} = {v}");
    }
    Ok(report.ok)
}

fn sweep_run(args: &RunArgs, axis: &str, values: &[String]) -> Result<bool, critnls::Error> {
    let overrides = parse_overrides(&args.overrides)?;
    let text = std::fs::read_to_string(&args.config)?;
    let base_text = if overrides.is_empty() {
        text
    } else {
        // bake the static overrides into the base before sweeping
        let (_cfg, canonical) = config::parse_with_overrides(&text, &overrides)?;
        canonical
    };
    let (cfg, _) = config::parse_with_overrides(&base_text, &[])?;
    let out = args.out.clone().unwrap_or_else(|| cfg.output.clone());
    let report = runner::sweep(&base_text, axis, values, args.jobs, &out)?;
    println!(
        "sweep over {axis}: {} rows written to {}",
        report.rows,
        out.join("sweep.csv").display()
    );
    for (value, error) in &report.failed {
        eprintln!("value {value} failed: {error}");
    }
    Ok(report.failed.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Zeta(a) => single_run(a, Some(Experiment::Zeta)),
        Command::Propagate(a) => single_run(a, Some(Experiment::Propagate)),
        Command::Evolve(a) => single_run(a, Some(Experiment::Evolve)),
        Command::Scatter(a) => single_run(a, Some(Experiment::Scatter)),
        Command::Classify(a) => single_run(a, Some(Experiment::Classify)),
        Command::Leibniz(a) => single_run(a, Some(Experiment::LeibnizScan)),
        Command::Acceptance(a) => single_run(a, Some(Experiment::Acceptance)),
        Command::Sweep { args, axis, values } => sweep_run(args, axis, values),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
