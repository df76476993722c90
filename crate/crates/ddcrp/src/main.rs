use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ddcrp::cli::{
    cmd_bayes_factor, cmd_check_invariance, cmd_compare_samplers, cmd_fit, cmd_langmodel,
    cmd_predict, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "ddcrp",
    about = "Distance dependent Chinese restaurant process clustering",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run collapsed Gibbs chains of the customer-link sampler.
    Fit(CommonArgs),
    /// Fully-observed token-sequence model: one chain per document.
    Langmodel(CommonArgs),
    /// Held-out predictive likelihood from a stored trace.
    Predict(CommonArgs),
    /// Log Bayes factor of the configured decay vs the identity decay.
    BayesFactor(CommonArgs),
    /// Paired trajectories of the link sampler and the table sampler.
    CompareSamplers(CommonArgs),
    /// Marginal-invariance residual reports for a decay family.
    CheckInvariance(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Customer count for prior-only runs without a corpus.
    #[arg(long)]
    n: Option<usize>,
    /// sequential | timestamps:PATH | timestamps-abs:PATH | edges:PATH
    #[arg(long)]
    distances: Option<String>,
    /// identity | zero | window:A | exponential:A | logistic:A | indicator:SET[:W] | reciprocal
    #[arg(long)]
    decay: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Griddy-Gibbs grid for alpha: log:LO:HI:POINTS or list:V1,V2,...
    #[arg(long)]
    alpha_grid: Option<String>,
    /// Griddy-Gibbs grid for the decay parameter, same syntax.
    #[arg(long)]
    decay_grid: Option<String>,
    /// dirichlet:LAMBDA | termmatch | termmatch:G0_PATH | none
    #[arg(long)]
    base: Option<String>,
    #[arg(long)]
    sweeps: Option<u64>,
    #[arg(long)]
    burnin: Option<u64>,
    #[arg(long)]
    thinning: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<u64>,
    /// Maximum number of chains run concurrently.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    shuffle_order: Option<bool>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Input trace file for predict / bayes-factor.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Held-out document file (one corpus-format line).
    #[arg(long)]
    heldout_doc: Option<PathBuf>,
    /// Held-out position/timestamp.
    #[arg(long)]
    heldout_time: Option<f64>,
    #[arg(long)]
    grid_min: Option<f64>,
    #[arg(long)]
    grid_max: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
}

impl CommonArgs {
    fn resolve(self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! overlay {
            ($($field:ident),*) => {
                $(if let Some(value) = self.$field {
                    cfg.$field = value;
                })*
            };
        }
        macro_rules! overlay_opt {
            ($($field:ident),*) => {
                $(if self.$field.is_some() {
                    cfg.$field = self.$field;
                })*
            };
        }
        overlay!(
            distances,
            decay,
            alpha,
            base,
            sweeps,
            burnin,
            thinning,
            seed,
            chains,
            workers,
            shuffle_order,
            output,
            grid_min,
            grid_max,
            grid_points
        );
        overlay_opt!(
            corpus,
            vocab,
            n,
            alpha_grid,
            decay_grid,
            trace,
            heldout_doc,
            heldout_time
        );
        Ok(cfg)
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Fit(args) => {
            let cfg = args.resolve()?;
            let summary = cmd_fit(&cfg)?;
            for chain in &summary.chains {
                println!(
                    "chain {}: {} stored samples, mean tables {}, final log-joint {}, consistency {}",
                    chain.chain,
                    chain.stored_samples,
                    chain.mean_tables,
                    chain.final_log_joint,
                    if chain.consistency_ok { "ok" } else { "FAILED" }
                );
            }
        }
        Command::Langmodel(args) => {
            let cfg = args.resolve()?;
            let summary = cmd_langmodel(&cfg)?;
            let total: f64 = summary.chains.iter().map(|c| c.final_log_joint).sum();
            println!(
                "{} documents, total final log-joint {total}",
                summary.chains.len()
            );
        }
        Command::Predict(args) => {
            let cfg = args.resolve()?;
            let estimate = cmd_predict(&cfg)?;
            println!(
                "log predictive {} (se {}, {} samples)",
                estimate.log_value, estimate.se_log, estimate.samples
            );
        }
        Command::BayesFactor(args) => {
            let cfg = args.resolve()?;
            let estimate = cmd_bayes_factor(&cfg)?;
            println!(
                "log Bayes factor {} (se {}, {} samples)",
                estimate.log_value, estimate.se_log, estimate.samples
            );
        }
        Command::CompareSamplers(args) => {
            let cfg = args.resolve()?;
            cmd_compare_samplers(&cfg)?;
            println!(
                "wrote {}",
                cfg.output.join("compare_samplers.csv").display()
            );
        }
        Command::CheckInvariance(args) => {
            let cfg = args.resolve()?;
            let max_abs = cmd_check_invariance(&cfg)?;
            println!("max |residual| over grid: {max_abs}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}
