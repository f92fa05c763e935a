//! Self-check suites with independent reference computations.
//!
//! Every instance is drawn from `substream(seed, Init, index)`, so a failure
//! is reproduced by its `(seed, index)` pair alone.

use std::fmt;
use std::ops::RangeInclusive;

use rand::Rng as _;
use regnn::consts::{CAPACITY_EQUIVARIANCE_TOL, FD_STEP, GRADIENT_REL_TOL, REGNN_EQUIVARIANCE_TOL};
use regnn::model::{evaluate, sigmoid, Activation};
use regnn::policy::{self, AllocationSpec};
use regnn::rng::{substream, Rng, Stream};
use regnn::wireless::{capacity, generate_adhoc, sample_fading};
use regnn::{apply_filter, backward, forward, permute, ChannelMatrix, FilterTensor, GraphSignal, Permutation, RegnnConfig};

use crate::error::{CoreContext, Result};

/// Absolute tolerance of the iterated-shift filter against explicit matrix powers.
pub const FILTER_ORACLE_TOL: f64 = 1e-12;

/// Gradient magnitude below which the self-check compares absolutely:
/// central differences of `log Ψ` carry about 1e-9 of rounding noise.
pub const GRADIENT_SCALE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Capacity,
    FilterPower,
    Gradient,
    Equivariance,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Capacity, Suite::FilterPower, Suite::Gradient, Suite::Equivariance];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Capacity => "capacity",
            Suite::FilterPower => "filter_power",
            Suite::Gradient => "gradient",
            Suite::Equivariance => "equivariance",
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Suite::Capacity => CAPACITY_EQUIVARIANCE_TOL,
            Suite::FilterPower => FILTER_ORACLE_TOL,
            Suite::Gradient => GRADIENT_REL_TOL,
            Suite::Equivariance => REGNN_EQUIVARIANCE_TOL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleArgs {
    pub sizes: RangeInclusive<usize>,
    pub instances: usize,
    pub seed: u64,
    /// Test hook: negate the analytic gradient before comparing.
    pub inject_sign_flip: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub index: u64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub instances: usize,
    pub worst: f64,
    pub seed: u64,
    pub violations: Vec<Violation>,
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.violations.is_empty() { "ok" } else { "FAIL" };
        write!(
            f,
            "{:<13} {status:<4} instances={} max_residual={:.3e} tol={:.0e}",
            self.suite.name(),
            self.instances,
            self.worst,
            self.suite.tolerance()
        )?;
        for v in &self.violations {
            write!(f, "\n  violation seed={} instance={} residual={:.3e}", self.seed, v.index, v.residual)?;
        }
        Ok(())
    }
}

/// Runs one suite over `args.instances` instances.
pub fn run_suite(suite: Suite, args: &OracleArgs) -> Result<SuiteReport> {
    let mut report = SuiteReport {
        suite,
        instances: args.instances,
        worst: 0.0,
        seed: args.seed,
        violations: Vec::new(),
    };
    for index in 0..args.instances as u64 {
        let mut rng = substream(args.seed, Stream::Init, index);
        let m = rng.random_range(args.sizes.clone());
        let residual = match suite {
            Suite::Capacity => capacity_residual(m, &mut rng)?,
            Suite::FilterPower => filter_residual(m, &mut rng)?,
            Suite::Gradient => gradient_residual(m.min(6), args.inject_sign_flip, &mut rng)?.floored,
            Suite::Equivariance => equivariance_residual(m, &mut rng)?,
        };
        report.worst = report.worst.max(residual);
        if residual.is_nan() || residual > suite.tolerance() {
            report.violations.push(Violation { index, residual });
        }
    }
    Ok(report)
}

pub fn run_all(args: &OracleArgs) -> Result<Vec<SuiteReport>> {
    Suite::ALL.iter().map(|&s| run_suite(s, args)).collect()
}

/// Row sums at most one keep filter powers of order one.
fn bounded_channel(m: usize, rng: &mut Rng) -> ChannelMatrix {
    ChannelMatrix::from_fn(m, |_, _| rng.random::<f64>() / m as f64).expect("finite entries")
}

fn random_config(max_layers: usize, max_f: usize, max_k: usize, rng: &mut Rng) -> RegnnConfig {
    let layers = rng.random_range(1..=max_layers);
    let mut features: Vec<usize> = (0..=layers).map(|_| rng.random_range(1..=max_f)).collect();
    features[0] = 1;
    features[layers] = 1;
    RegnnConfig {
        features,
        taps: (0..layers).map(|_| rng.random_range(1..=max_k)).collect(),
        ..RegnnConfig::uniform(1, 1, 1)
    }
}

fn random_taps(config: &RegnnConfig, rng: &mut Rng) -> Result<FilterTensor> {
    let n = regnn::num_params(config);
    FilterTensor::from_flat(config.clone(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).context("taps")
}

fn dense_powers(h: &ChannelMatrix, k: usize) -> Vec<Vec<Vec<f64>>> {
    let m = h.dim();
    let mut out: Vec<Vec<Vec<f64>>> = vec![(0..m).map(|i| (0..m).map(|j| f64::from(u8::from(i == j))).collect()).collect()];
    for p in 1..k {
        let prev = &out[p - 1];
        let next = (0..m)
            .map(|i| (0..m).map(|j| (0..m).map(|t| prev[i][t] * h.get(t, j)).sum()).collect())
            .collect();
        out.push(next);
    }
    out
}

fn dense_apply(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum()).collect()
}

fn activate(a: Activation, y: f64) -> f64 {
    match a {
        Activation::Relu => y.max(0.0),
        Activation::Abs => y.abs(),
        Activation::Sigmoid => sigmoid(y),
    }
}

/// Layer recursion with explicit matrix powers over the flat `(l, f, g, k)` tap layout.
pub fn naive_forward(params: &FilterTensor, h: &ChannelMatrix, x: &[f64]) -> Vec<f64> {
    let cfg = params.config();
    let m = h.dim();
    let taps = params.as_slice();
    let mut z = vec![x.to_vec()];
    let mut offset = 0;
    for l in 0..cfg.layers() {
        let (fi, fo, kl) = (cfg.features[l], cfg.features[l + 1], cfg.taps[l]);
        let powers = dense_powers(h, kl);
        let mut next = vec![vec![0.0; m]; fo];
        for (f, zf) in z.iter().enumerate() {
            for (g, out) in next.iter_mut().enumerate() {
                for (k, pk) in powers.iter().enumerate() {
                    let a = taps[offset + (f * fo + g) * kl + k];
                    for (o, v) in out.iter_mut().zip(dense_apply(pk, zf)) {
                        *o += a * v;
                    }
                }
            }
        }
        offset += fi * fo * kl;
        let act = if l + 1 == cfg.layers() { cfg.output } else { cfg.hidden };
        z = next.into_iter().map(|v| v.into_iter().map(|y| activate(act, y)).collect()).collect();
    }
    z.pop().unwrap_or_default()
}

/// Rate of node `i`, one term at a time.
fn scalar_rate(p: &[f64], h: &ChannelMatrix, sigma2: f64, i: usize) -> f64 {
    let mut noise = sigma2;
    for (j, &pj) in p.iter().enumerate() {
        if j != i {
            noise += h.get(j, i).powi(2) * pj;
        }
    }
    (1.0 + h.get(i, i).powi(2) * p[i] / noise).ln()
}

/// Max of |capacity − term-by-term rate| and the relabelling residual
/// `|c(Πp, ΠHΠᵀ) − Π c(p, H)|` on a geometric network draw.
pub fn capacity_residual(m: usize, rng: &mut Rng) -> Result<f64> {
    let m = m.max(2);
    let net = generate_adhoc(m, rng, 1.0, m).context("network generation")?;
    let h = sample_fading(&net, rng, 0).h;
    let p: Vec<f64> = (0..m)
        .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) })
        .collect();
    let sigma2 = rng.random_range(0.1..2.0);
    let c = capacity(&p, &h, sigma2);
    let mut worst = (0..m).map(|i| (c[i] - scalar_rate(&p, &h, sigma2, i)).abs()).fold(0.0, f64::max);
    let pi = Permutation::random(m, rng);
    let hp = pi.apply_matrix(&h).context("permutation")?;
    let cp = capacity(&pi.apply_vec(&p), &hp, sigma2);
    for (a, b) in cp.iter().zip(pi.apply_vec(&c)) {
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

/// Iterated-shift filter against `Σ_k a_k Hᵏ z` with explicit powers.
pub fn filter_residual(m: usize, rng: &mut Rng) -> Result<f64> {
    let h = bounded_channel(m, rng);
    let k = rng.random_range(1..=5);
    let taps: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let f = rng.random_range(1..=3);
    let cols: Vec<Vec<f64>> = (0..f).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let z = GraphSignal::from_features(cols.clone()).context("signal")?;
    let got = apply_filter(&h, &z, &taps).context("filter")?;
    let powers = dense_powers(&h, k);
    let mut worst = 0.0f64;
    for (fi, col) in cols.iter().enumerate() {
        let mut want = vec![0.0; m];
        for (a, pk) in taps.iter().zip(&powers) {
            for (w, v) in want.iter_mut().zip(dense_apply(pk, col)) {
                *w += a * v;
            }
        }
        for (g, w) in got.feature(fi).iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
    }
    Ok(worst)
}

fn log_bernoulli(transmit: &[bool], probs: &[f64]) -> f64 {
    transmit
        .iter()
        .zip(probs)
        .map(|(&b, &q)| {
            let q = policy::clamp_prob(q);
            if b {
                q.ln()
            } else {
                (1.0 - q).ln()
            }
        })
        .sum()
}

/// `|a − b| / max(|a|, |b|, floor)`, zero when the denominator vanishes.
fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    let d = a.abs().max(b.abs()).max(floor);
    if d == 0.0 {
        0.0
    } else {
        (a - b).abs() / d
    }
}

/// Worst per-tap gradient discrepancy of one instance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GradientError {
    /// `|a − n| / max(|a|, |n|)`.
    pub relative: f64,
    /// Same with the denominator floored at [`GRADIENT_SCALE_FLOOR`].
    pub floored: f64,
}

/// Reverse-mode score gradient against central differences of `log Ψ`
/// through [`naive_forward`].
pub fn gradient_residual(m: usize, flip_sign: bool, rng: &mut Rng) -> Result<GradientError> {
    let cfg = random_config(3, 3, 4, rng);
    let params = random_taps(&cfg, rng)?;
    let h = bounded_channel(m, rng);
    let x: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
    let (probs, tape) = forward(&params, &h, &GraphSignal::from_vec(x.clone())).context("forward")?;
    let draw = policy::sample(&probs, AllocationSpec { p0: 1.0 }, rng);
    let score = policy::grad_log_prob(&draw, &probs);
    let mut analytic = backward(&tape, &params, &h, &score).context("backward")?;
    if flip_sign {
        analytic.as_mut_slice().iter_mut().for_each(|g| *g = -*g);
    }
    let base = params.as_slice().to_vec();
    let mut err = GradientError::default();
    for (i, a) in analytic.as_slice().iter().enumerate() {
        let at = |delta: f64| -> Result<f64> {
            let mut t = base.clone();
            t[i] += delta;
            let p = FilterTensor::from_flat(cfg.clone(), t).context("taps")?;
            Ok(log_bernoulli(&draw.transmit, &naive_forward(&p, &h, &x)))
        };
        let numeric = (at(FD_STEP)? - at(-FD_STEP)?) / (2.0 * FD_STEP);
        err.relative = err.relative.max(rel_err(*a, numeric, 0.0));
        err.floored = err.floored.max(rel_err(*a, numeric, GRADIENT_SCALE_FLOOR));
    }
    Ok(err)
}

/// `max |Φ(ΠᵀHΠ, Πᵀx) − ΠᵀΦ(H, x)|` for random taps, channel and relabelling.
pub fn equivariance_residual(m: usize, rng: &mut Rng) -> Result<f64> {
    let cfg = random_config(4, 3, 5, rng);
    let params = random_taps(&cfg, rng)?;
    let h = bounded_channel(m, rng);
    let x = GraphSignal::from_vec((0..m).map(|_| rng.random_range(-1.0..1.0)).collect());
    let pi = Permutation::random(m, rng);
    let (hp, xp) = permute(&h, &x, &pi).context("permutation")?;
    let out = evaluate(&params, &h, &x).context("forward")?;
    let out_p = evaluate(&params, &hp, &xp).context("forward")?;
    let moved = pi.apply_signal(&out).context("permutation")?;
    Ok(out_p.max_abs_diff(&moved))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(instances: usize, flip: bool) -> OracleArgs {
        OracleArgs {
            sizes: 2..=10,
            instances,
            seed: 0,
            inject_sign_flip: flip,
        }
    }

    #[test]
    fn default_suites_are_green() {
        for report in run_all(&args(10, false)).unwrap() {
            assert!(report.violations.is_empty(), "{report}");
        }
    }

    #[test]
    fn sign_flip_breaks_only_the_gradient_suite() {
        let reports = run_all(&args(3, true)).unwrap();
        for r in reports {
            assert_eq!(r.violations.is_empty(), r.suite != Suite::Gradient, "{r}");
        }
    }

    #[test]
    fn naive_forward_agrees_with_library_forward() {
        let mut rng = substream(9, Stream::Init, 0);
        let cfg = random_config(3, 3, 4, &mut rng);
        let params = random_taps(&cfg, &mut rng).unwrap();
        let h = bounded_channel(5, &mut rng);
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
        let lib = evaluate(&params, &h, &GraphSignal::from_vec(x.clone())).unwrap();
        for (a, b) in lib.values().iter().zip(naive_forward(&params, &h, &x)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
