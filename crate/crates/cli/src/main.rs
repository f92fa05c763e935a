use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use regnn_cli::commands::{self, EvalArgs, TransferArgs};
use regnn_cli::oracle::{self, OracleArgs};
use regnn_cli::ExperimentConfig;

/// Experiments with random-edge graph neural networks for binary power allocation.
#[derive(Parser)]
#[command(name = "regnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Omit to use the built-in defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Seed override: the training seed for `train`, the topology seed for
    /// `gen-network`, the evaluation seed otherwise.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Draw the configured topology and write it as JSON.
    GenNetwork {
        #[command(flatten)]
        common: Common,
    },
    /// Train a REGNN and write checkpoint, metrics CSV and run header.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Per-draw paired comparison of a checkpoint against the baselines.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Topology file; defaults to the configured network.
        #[arg(long)]
        network: Option<PathBuf>,
        /// Fading draws; defaults to `output.eval_samples`.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Evaluate a checkpoint on fresh constant-density networks of other sizes.
    Transfer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Network sizes (comma separated); defaults to `transfer.sizes`.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Density factors for a density sweep; defaults to `transfer.densities`.
        #[arg(long, value_delimiter = ',')]
        densities: Option<Vec<f64>>,
        #[arg(long)]
        networks_per_size: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Run the capacity, filter, gradient and equivariance self-checks.
    OracleCheck {
        /// Largest network size (at most 10).
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        quiet: bool,
        #[arg(long, hide = true)]
        inject_sign_flip: bool,
    },
    /// WMMSE, equal power and random selection on the configured network.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
    },
}

impl Common {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        match &self.config {
            Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display())),
            None => Ok(ExperimentConfig::default().resolve()?),
        }
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out.clone().unwrap_or_else(|| cfg.output.dir.clone())
    }

    fn eval_seed(&self, cfg: &ExperimentConfig) -> u64 {
        self.seed.unwrap_or(cfg.network.seed)
    }
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn wrote(quiet: bool, path: &Path) {
    say(quiet, format!("wrote {}", path.display()));
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::GenNetwork { common } => {
            let mut cfg = common.load()?;
            if let Some(s) = common.seed {
                cfg.network.seed = s;
            }
            let path = commands::gen_network(&cfg, &common.out_dir(&cfg))?;
            wrote(common.quiet, &path);
        }
        Command::Train { common } => {
            let mut cfg = common.load()?;
            if let Some(s) = common.seed {
                cfg.train.seed = s;
            }
            let (outcome, paths) = commands::train(&cfg, &common.out_dir(&cfg))?;
            if let Some(last) = outcome.report.records.last() {
                say(
                    common.quiet,
                    format!(
                        "iteration {}: sum-rate {:.4} (thresholded {:.4}), mean power {:.3}",
                        last.iteration, last.sum_rate_sampled, last.sum_rate_threshold, last.mean_power
                    ),
                );
            }
            for p in [&paths.checkpoint, &paths.csv, &paths.header] {
                wrote(common.quiet, p);
            }
        }
        Command::Eval {
            common,
            checkpoint,
            network,
            samples,
        } => {
            let cfg = common.load()?;
            let args = EvalArgs {
                checkpoint,
                network,
                samples: samples.unwrap_or(cfg.output.eval_samples),
                seed: common.eval_seed(&cfg),
            };
            let (table, path) = commands::eval(&cfg, &args, &common.out_dir(&cfg))?;
            for col in ["regnn_sampled", "regnn_threshold", "wmmse", "equal", "random"] {
                let v = table.column(col).unwrap_or_default();
                say(common.quiet, format!("{col:<16} mean {:.4}", v.iter().sum::<f64>() / v.len().max(1) as f64));
            }
            wrote(common.quiet, &path);
        }
        Command::Transfer {
            common,
            checkpoint,
            sizes,
            densities,
            networks_per_size,
            samples,
        } => {
            let cfg = common.load()?;
            let mut args = TransferArgs::from_config(&cfg, checkpoint, common.eval_seed(&cfg));
            if let Some(s) = sizes {
                args.sizes = s;
            }
            if let Some(d) = densities {
                args.densities = d;
            }
            if let Some(n) = networks_per_size {
                args.networks_per_size = n;
            }
            if let Some(n) = samples {
                args.samples = n;
            }
            let (rows, path) = commands::transfer(&cfg, &args, &common.out_dir(&cfg))?;
            for r in rows {
                say(
                    common.quiet,
                    format!(
                        "m'={:<4} density={:<5} {:<16} mean {:.4}  ratio to WMMSE {:.3}",
                        r.m, r.density, r.policy, r.mean, r.ratio_to_wmmse
                    ),
                );
            }
            wrote(common.quiet, &path);
        }
        Command::OracleCheck {
            m,
            instances,
            seed,
            quiet,
            inject_sign_flip,
        } => {
            anyhow::ensure!((2..=10).contains(&m), "--m must lie in 2..=10, got {m}");
            let args = OracleArgs {
                sizes: 2..=m,
                instances,
                seed,
                inject_sign_flip,
            };
            let reports = oracle::run_all(&args)?;
            let failed = reports.iter().filter(|r| !r.violations.is_empty()).count();
            for r in &reports {
                if !quiet || !r.violations.is_empty() {
                    println!("{r}");
                }
            }
            if failed > 0 {
                return Err(regnn_cli::CliError::OracleFailed(failed).into());
            }
        }
        Command::Baseline { common, samples } => {
            let cfg = common.load()?;
            let samples = samples.unwrap_or(cfg.output.eval_samples);
            let (_, path) = commands::baseline(&cfg, samples, common.eval_seed(&cfg), &common.out_dir(&cfg))?;
            wrote(common.quiet, &path);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
