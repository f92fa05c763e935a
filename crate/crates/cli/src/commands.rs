//! Subcommand implementations. Each returns the paths it wrote.

use std::path::{Path, PathBuf};

use regnn::consts::BRUTE_FORCE_MAX_NODES;
use regnn::model::evaluate;
use regnn::policy;
use regnn::rng::{substream, Rng, Stream};
use regnn::trainer::extend_problem;
use regnn::wireless::{
    brute_force_binary, equal_power, generate_adhoc, random_selection, sample_fading, sum_rate, wmmse,
    WmmseSettings,
};
use regnn::{FilterTensor, GraphSignal, NetworkModel, ProblemSpec, TrainOutcome};
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::csv::{Cell, Table};
use crate::error::{CliError, CoreContext, Result};

pub const TOPOLOGY_FILE: &str = "topology.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRAIN_CSV: &str = "train.csv";
pub const RUN_HEADER: &str = "run.json";
pub const EVAL_CSV: &str = "eval.csv";
pub const TRANSFER_CSV: &str = "transfer.csv";
pub const BASELINE_CSV: &str = "baseline.csv";

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<FilterTensor> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    FilterTensor::from_checkpoint(&text).context(&format!("checkpoint {}", path.display()))
}

pub fn load_network(path: &Path) -> Result<NetworkModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    NetworkModel::from_json(&text).context(&format!("topology {}", path.display()))
}

/// Writes the configured topology as JSON.
pub fn gen_network(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    let net = cfg.network()?;
    let path = out.join(TOPOLOGY_FILE);
    write(&path, &net.to_json().context("topology")?)?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub checkpoint: PathBuf,
    pub csv: PathBuf,
    pub header: PathBuf,
}

pub fn train_table(cfg: &ExperimentConfig, outcome: &TrainOutcome) -> Result<Table> {
    let mut table = Table::new(
        cfg.train.seed,
        cfg.hash_with("train")?,
        &[
            "iteration",
            "objective",
            "sum_rate_sampled",
            "sum_rate_threshold",
            "mean_power",
            "lambda_norm",
            "mu_norm",
            "min_slack",
            "violated",
        ],
    );
    for r in &outcome.report.records {
        let min_slack = r.slack.iter().copied().fold(f64::INFINITY, f64::min);
        let violated = r.slack.iter().filter(|&&s| s < 0.0).count();
        table.push(vec![
            r.iteration.into(),
            r.objective.into(),
            r.sum_rate_sampled.into(),
            r.sum_rate_threshold.into(),
            r.mean_power.into(),
            r.lambda_norm.into(),
            r.mu_norm.into(),
            min_slack.into(),
            violated.into(),
        ]);
    }
    Ok(table)
}

/// Trains on the configured topology and writes checkpoint, CSV and run header.
pub fn train(cfg: &ExperimentConfig, out: &Path) -> Result<(TrainOutcome, TrainArtifacts)> {
    ensure_dir(out)?;
    let net = cfg.network()?;
    let outcome =
        regnn::train(&net, &cfg.problem_spec(), &cfg.regnn, &cfg.train_config()).context("training")?;
    let artifacts = TrainArtifacts {
        checkpoint: out.join(CHECKPOINT_FILE),
        csv: out.join(TRAIN_CSV),
        header: out.join(RUN_HEADER),
    };
    write(&artifacts.checkpoint, &outcome.params.to_checkpoint().context("checkpoint")?)?;
    train_table(cfg, &outcome)?.write(&artifacts.csv)?;
    let header = json!({
        "command": "train",
        "seed": cfg.train.seed,
        "config_sha256": cfg.hash_with("train")?,
        "config": cfg,
        "num_params": regnn::num_params(&cfg.regnn),
        "network_m": net.m(),
        "final": outcome.report.records.last(),
        "min_mu": outcome.report.min_mu,
        "dual": outcome.state,
    });
    write(&artifacts.header, &(serde_json::to_string_pretty(&header)? + "\n"))?;
    Ok((outcome, artifacts))
}

/// Sum-rates of every policy on one shared fading draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawRates {
    pub regnn_sampled: f64,
    pub regnn_threshold: f64,
    pub regnn_power: f64,
    pub wmmse: f64,
    pub equal: f64,
    pub random: f64,
}

struct EvalStreams {
    fading: Rng,
    demand: Rng,
    policy: Rng,
    baseline: Rng,
}

impl EvalStreams {
    // Index 0 lines up with the held-out streams used during training.
    fn new(seed: u64, index: u64) -> Self {
        Self {
            fading: substream(seed, Stream::FadingEval, index),
            demand: substream(seed, Stream::Demand, index + 1),
            policy: substream(seed, Stream::Policy, index + 1),
            baseline: substream(seed, Stream::Baseline, index),
        }
    }
}

/// Evaluates the REGNN and the baselines on `samples` paired fading draws.
pub fn paired_draws(
    params: &FilterTensor,
    net: &NetworkModel,
    problem: &ProblemSpec,
    samples: usize,
    seed: u64,
    index: u64,
) -> Result<Vec<DrawRates>> {
    let m = net.m();
    let mut s = EvalStreams::new(seed, index);
    let (sigma2, p0) = (problem.sigma2, problem.alloc.p0);
    let extended = extend_problem(problem, m).context("problem")?;
    let equal = equal_power(m, problem.p_max);
    let mut out = Vec::with_capacity(samples);
    for n in 0..samples {
        let h = sample_fading(net, &mut s.fading, n as u64).h;
        let x = extended.sample_state(&mut s.demand).context("state sampling")?;
        let probs = evaluate(params, &h, &GraphSignal::from_vec(x)).context("REGNN forward")?;
        let draw = policy::sample(&probs, problem.alloc, &mut s.policy);
        let fixed = policy::threshold(&probs, problem.alloc);
        let random = random_selection(m, problem.p_max, p0, &mut s.baseline).context("random selection")?;
        out.push(DrawRates {
            regnn_sampled: sum_rate(&draw.allocation, &h, sigma2),
            regnn_threshold: sum_rate(&fixed, &h, sigma2),
            regnn_power: draw.allocation.iter().sum(),
            wmmse: sum_rate(&wmmse(&h, sigma2, p0, WmmseSettings::default()).power, &h, sigma2),
            equal: sum_rate(&equal, &h, sigma2),
            random: sum_rate(&random, &h, sigma2),
        });
    }
    Ok(out)
}

pub fn eval_table(cfg: &ExperimentConfig, rates: &[DrawRates], seed: u64, descriptor: &str) -> Result<Table> {
    let mut table = Table::new(
        seed,
        cfg.hash_with(descriptor)?,
        &["draw", "regnn_sampled", "regnn_threshold", "regnn_power", "wmmse", "equal", "random"],
    );
    for (n, r) in rates.iter().enumerate() {
        table.push(vec![
            n.into(),
            r.regnn_sampled.into(),
            r.regnn_threshold.into(),
            r.regnn_power.into(),
            r.wmmse.into(),
            r.equal.into(),
            r.random.into(),
        ]);
    }
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub network: Option<PathBuf>,
    pub samples: usize,
    pub seed: u64,
}

/// Per-draw paired comparison on one topology.
pub fn eval(cfg: &ExperimentConfig, args: &EvalArgs, out: &Path) -> Result<(Table, PathBuf)> {
    ensure_dir(out)?;
    let params = load_checkpoint(&args.checkpoint)?;
    let net = match &args.network {
        Some(p) => load_network(p)?,
        None => cfg.network()?,
    };
    let problem = cfg.problem_for(net.m());
    let rates = paired_draws(&params, &net, &problem, args.samples, args.seed, 0)?;
    let descriptor = format!(
        "eval samples={} checkpoint={} network={}",
        args.samples,
        digest(&params.to_checkpoint().context("checkpoint")?),
        digest(&net.to_json().context("topology")?),
    );
    let table = eval_table(cfg, &rates, args.seed, &descriptor)?;
    let path = out.join(EVAL_CSV);
    table.write(&path)?;
    Ok((table, path))
}

fn digest(text: &str) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone)]
pub struct TransferArgs {
    pub checkpoint: PathBuf,
    pub sizes: Vec<usize>,
    pub densities: Vec<f64>,
    pub networks_per_size: usize,
    pub samples: usize,
    pub seed: u64,
}

impl TransferArgs {
    pub fn from_config(cfg: &ExperimentConfig, checkpoint: PathBuf, seed: u64) -> Self {
        Self {
            checkpoint,
            sizes: cfg.transfer.sizes.clone(),
            densities: cfg.transfer.densities.clone(),
            networks_per_size: cfg.transfer.networks_per_size,
            samples: cfg.transfer.samples,
            seed,
        }
    }
}

/// Aggregate of one policy at one size and density.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferRow {
    pub m: usize,
    pub density: f64,
    pub policy: &'static str,
    pub networks: usize,
    pub draws: usize,
    pub mean: f64,
    pub std_err: f64,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
    pub ratio_to_wmmse: f64,
}

pub const POLICIES: [&str; 5] = ["regnn_sampled", "regnn_threshold", "wmmse", "equal", "random"];

fn policy_value(r: &DrawRates, policy: &str) -> f64 {
    match policy {
        "regnn_sampled" => r.regnn_sampled,
        "regnn_threshold" => r.regnn_threshold,
        "wmmse" => r.wmmse,
        "equal" => r.equal,
        _ => r.random,
    }
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn transfer_index(m: usize, net: usize) -> u64 {
    ((m as u64) << 16) | net as u64
}

/// Runs `jobs` on scoped worker threads and returns results in job order.
fn parallel_map<T: Send, F: Fn(usize) -> T + Sync>(jobs: usize, f: F) -> Vec<T> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.max(1));
    let mut slots: Vec<Option<T>> = (0..jobs).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                scope.spawn(move || (w..jobs).step_by(workers).map(|j| (j, f(j))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (j, v) in h.join().expect("worker panicked") {
                slots[j] = Some(v);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every job ran")).collect()
}

/// Evaluates a checkpoint on fresh constant-density topologies of other sizes.
pub fn transfer_rows(cfg: &ExperimentConfig, args: &TransferArgs) -> Result<Vec<TransferRow>> {
    let params = load_checkpoint(&args.checkpoint)?;
    let size_ref = cfg.network.m;
    let mut rows = Vec::new();
    if args.networks_per_size == 0 {
        return Ok(rows);
    }
    for &m in &args.sizes {
        let problem = cfg.problem_for(m);
        for &density in &args.densities {
            let per_net = parallel_map(args.networks_per_size, |k| -> Result<Vec<DrawRates>> {
                let index = transfer_index(m, k);
                let mut topo = substream(args.seed, Stream::Topology, index);
                let net = generate_adhoc(m, &mut topo, density, size_ref).context("network generation")?;
                paired_draws(&params, &net, &problem, args.samples, args.seed, index)
            });
            let draws: Vec<DrawRates> = per_net.into_iter().collect::<Result<Vec<_>>>()?.concat();
            let n = draws.len() as f64;
            let mean_of = |p: &str| draws.iter().map(|r| policy_value(r, p)).sum::<f64>() / n;
            let wmmse_mean = mean_of("wmmse");
            for policy in POLICIES {
                let mut vals: Vec<f64> = draws.iter().map(|r| policy_value(r, policy)).collect();
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                vals.sort_by(f64::total_cmp);
                rows.push(TransferRow {
                    m,
                    density,
                    policy,
                    networks: args.networks_per_size,
                    draws: args.samples,
                    mean,
                    std_err: (var / n).sqrt(),
                    p10: percentile(&vals, 0.1),
                    p50: percentile(&vals, 0.5),
                    p90: percentile(&vals, 0.9),
                    ratio_to_wmmse: mean / wmmse_mean,
                });
            }
        }
    }
    Ok(rows)
}

pub fn transfer(cfg: &ExperimentConfig, args: &TransferArgs, out: &Path) -> Result<(Vec<TransferRow>, PathBuf)> {
    ensure_dir(out)?;
    let rows = transfer_rows(cfg, args)?;
    let params = load_checkpoint(&args.checkpoint)?;
    let descriptor = format!(
        "transfer sizes={:?} densities={:?} networks={} samples={} checkpoint={}",
        args.sizes,
        args.densities,
        args.networks_per_size,
        args.samples,
        digest(&params.to_checkpoint().context("checkpoint")?),
    );
    let mut table = Table::new(
        args.seed,
        cfg.hash_with(&descriptor)?,
        &[
            "m_prime",
            "density",
            "policy",
            "networks",
            "draws",
            "mean",
            "std_err",
            "p10",
            "p50",
            "p90",
            "ratio_to_wmmse",
        ],
    );
    for r in &rows {
        table.push(vec![
            r.m.into(),
            r.density.into(),
            r.policy.into(),
            r.networks.into(),
            r.draws.into(),
            r.mean.into(),
            r.std_err.into(),
            r.p10.into(),
            r.p50.into(),
            r.p90.into(),
            r.ratio_to_wmmse.into(),
        ]);
    }
    let path = out.join(TRANSFER_CSV);
    table.write(&path)?;
    Ok((rows, path))
}

/// Classical baselines only, on the configured topology. Adds the exhaustive
/// binary optimum when the network is small enough.
pub fn baseline(cfg: &ExperimentConfig, samples: usize, seed: u64, out: &Path) -> Result<(Table, PathBuf)> {
    ensure_dir(out)?;
    let net = cfg.network()?;
    let m = net.m();
    let problem = cfg.problem_spec();
    let (sigma2, p0) = (problem.sigma2, problem.alloc.p0);
    let exhaustive = m <= BRUTE_FORCE_MAX_NODES;
    let mut columns = vec!["draw", "wmmse", "wmmse_binary", "equal", "random", "all_on"];
    if exhaustive {
        columns.push("brute_force");
    }
    let mut table = Table::new(seed, cfg.hash_with(&format!("baseline samples={samples}"))?, &columns);
    let mut s = EvalStreams::new(seed, 0);
    let equal = equal_power(m, problem.p_max);
    let all_on = vec![p0; m];
    for n in 0..samples {
        let h = sample_fading(&net, &mut s.fading, n as u64).h;
        let w = wmmse(&h, sigma2, p0, WmmseSettings::default()).power;
        let w_bin: Vec<f64> = w.iter().map(|&p| if p > p0 / 2.0 { p0 } else { 0.0 }).collect();
        let random = random_selection(m, problem.p_max, p0, &mut s.baseline).context("random selection")?;
        let mut row: Vec<Cell> = vec![
            n.into(),
            sum_rate(&w, &h, sigma2).into(),
            sum_rate(&w_bin, &h, sigma2).into(),
            sum_rate(&equal, &h, sigma2).into(),
            sum_rate(&random, &h, sigma2).into(),
            sum_rate(&all_on, &h, sigma2).into(),
        ];
        if exhaustive {
            row.push(brute_force_binary(&h, sigma2, p0).context("brute force")?.1.into());
        }
        table.push(row);
    }
    let path = out.join(BASELINE_CSV);
    table.write(&path)?;
    Ok((table, path))
}
