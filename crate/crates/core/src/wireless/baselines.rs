use rand::Rng;
use serde::{Deserialize, Serialize};

use super::channel::sum_rate;
use crate::consts::BRUTE_FORCE_MAX_NODES;
use crate::error::{Error, Result};
use crate::graph::ChannelMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WmmseSettings {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for WmmseSettings {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseOutcome {
    /// Continuous powers in `[0, p0]`.
    pub power: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Weighted-MMSE block-coordinate power control for the scalar interference
/// channel, started at full power.
pub fn wmmse(h: &ChannelMatrix, sigma2: f64, p0: f64, settings: WmmseSettings) -> WmmseOutcome {
    run_wmmse(h, sigma2, p0, settings, None)
}

/// As [`wmmse`], also returning the sum-rate of the initial point and of
/// every iterate.
pub fn wmmse_with_trace(
    h: &ChannelMatrix,
    sigma2: f64,
    p0: f64,
    settings: WmmseSettings,
) -> (WmmseOutcome, Vec<f64>) {
    let mut trace = Vec::new();
    let out = run_wmmse(h, sigma2, p0, settings, Some(&mut trace));
    (out, trace)
}

fn run_wmmse(
    h: &ChannelMatrix,
    sigma2: f64,
    p0: f64,
    settings: WmmseSettings,
    mut trace: Option<&mut Vec<f64>>,
) -> WmmseOutcome {
    let m = h.dim();
    let vmax = p0.sqrt();
    let mut v = vec![vmax; m];
    let mut u = vec![0.0; m];
    let mut w = vec![0.0; m];
    let power = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<_>>();
    if let Some(t) = trace.as_deref_mut() {
        t.push(sum_rate(&power(&v), h, sigma2));
    }
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_iters {
        iterations += 1;
        for i in 0..m {
            let rx: f64 = (0..m).map(|j| (h.get(j, i) * v[j]).powi(2)).sum::<f64>() + sigma2;
            u[i] = h.get(i, i) * v[i] / rx;
            w[i] = 1.0 / (1.0 - u[i] * h.get(i, i) * v[i]);
        }
        let mut delta = 0.0f64;
        for i in 0..m {
            let denom: f64 = (0..m).map(|j| w[j] * (u[j] * h.get(i, j)).powi(2)).sum();
            let target = if denom > 0.0 {
                w[i] * u[i] * h.get(i, i) / denom
            } else {
                vmax
            };
            let next = target.clamp(0.0, vmax);
            delta = delta.max((next - v[i]).abs());
            v[i] = next;
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(sum_rate(&power(&v), h, sigma2));
        }
        if delta < settings.tol {
            converged = true;
            break;
        }
    }
    WmmseOutcome {
        power: power(&v),
        iterations,
        converged,
    }
}

/// Every node at `P_max / m`.
pub fn equal_power(m: usize, p_max: f64) -> Vec<f64> {
    vec![p_max / m as f64; m]
}

/// `⌊P_max/p0⌋` nodes chosen uniformly at random transmit at `p0`.
pub fn random_selection<R: Rng + ?Sized>(m: usize, p_max: f64, p0: f64, rng: &mut R) -> Result<Vec<f64>> {
    if p_max > m as f64 * p0 {
        return Err(Error::InvalidProblem(format!(
            "budget {p_max} exceeds m·p0 = {}",
            m as f64 * p0
        )));
    }
    let k = (p_max / p0).floor() as usize;
    let mut p = vec![0.0; m];
    for i in rand::seq::index::sample(rng, m, k) {
        p[i] = p0;
    }
    Ok(p)
}

/// Exhaustive search of `{0, p0}^m` for the instantaneous sum-rate maximiser.
/// Ties go to fewer transmitters, then to the lowest binary code (bit `i` = node `i`).
pub fn brute_force_binary(h: &ChannelMatrix, sigma2: f64, p0: f64) -> Result<(Vec<f64>, f64)> {
    let m = h.dim();
    if m > BRUTE_FORCE_MAX_NODES {
        return Err(Error::TooLarge {
            m,
            max: BRUTE_FORCE_MAX_NODES,
        });
    }
    let decode = |code: u32| -> Vec<f64> {
        (0..m)
            .map(|i| if code >> i & 1 == 1 { p0 } else { 0.0 })
            .collect()
    };
    let mut best = (0u32, sum_rate(&decode(0), h, sigma2));
    for code in 1..(1u32 << m) {
        let rate = sum_rate(&decode(code), h, sigma2);
        if rate > best.1 || (rate == best.1 && code.count_ones() < best.0.count_ones()) {
            best = (code, rate);
        }
    }
    Ok((decode(best.0), best.1))
}
