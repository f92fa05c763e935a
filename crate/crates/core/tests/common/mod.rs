#![allow(dead_code)]

use rand::Rng;
use regnn::model::{sigmoid, Activation};
use regnn::{ChannelMatrix, FilterTensor, GraphSignal, RegnnConfig};

/// Nonnegative matrix with row sums at most one, so filter powers stay O(1).
pub fn bounded_channel(m: usize, rng: &mut impl Rng) -> ChannelMatrix {
    ChannelMatrix::from_fn(m, |_, _| rng.random::<f64>() / m as f64).unwrap()
}

pub fn signal(m: usize, f: usize, rng: &mut impl Rng) -> GraphSignal {
    GraphSignal::from_features(
        (0..f)
            .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
    )
    .unwrap()
}

pub fn random_config(layers: usize, max_f: usize, max_k: usize, rng: &mut impl Rng) -> RegnnConfig {
    let mut features: Vec<usize> = (0..=layers).map(|_| rng.random_range(1..=max_f)).collect();
    features[0] = 1;
    features[layers] = 1;
    let taps = (0..layers).map(|_| rng.random_range(1..=max_k)).collect();
    RegnnConfig {
        features,
        taps,
        ..RegnnConfig::uniform(1, 1, 1)
    }
}

pub fn random_taps(config: &RegnnConfig, scale: f64, rng: &mut impl Rng) -> FilterTensor {
    let n = regnn::num_params(config);
    FilterTensor::from_flat(config.clone(), (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

fn dense_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a.len();
    let mut c = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// Explicit powers `H⁰..H^{k-1}` as dense matrices.
pub fn dense_powers(h: &ChannelMatrix, k: usize) -> Vec<Vec<Vec<f64>>> {
    let m = h.dim();
    let base: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| h.get(i, j)).collect()).collect();
    let mut out = vec![(0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect::<Vec<Vec<f64>>>()];
    for p in 1..k {
        let next = dense_mul(&out[p - 1], &base);
        out.push(next);
    }
    out
}

fn act(a: Activation, y: f64) -> f64 {
    match a {
        Activation::Relu => y.max(0.0),
        Activation::Abs => y.abs(),
        Activation::Sigmoid => sigmoid(y),
    }
}

/// Layer recursion written out with explicit matrix powers and the
/// documented flat tap layout `(layer, f, g, k)`.
pub fn naive_forward(params: &FilterTensor, h: &ChannelMatrix, x: &[f64]) -> Vec<f64> {
    let cfg = params.config();
    let m = h.dim();
    let taps = params.as_slice();
    let mut z: Vec<Vec<f64>> = vec![x.to_vec()];
    let mut offset = 0;
    for l in 0..cfg.layers() {
        let (fi, fo, kl) = (cfg.features[l], cfg.features[l + 1], cfg.taps[l]);
        let powers = dense_powers(h, kl);
        let mut next = vec![vec![0.0; m]; fo];
        for f in 0..fi {
            for g in 0..fo {
                for k in 0..kl {
                    let a = taps[offset + (f * fo + g) * kl + k];
                    for i in 0..m {
                        let s: f64 = (0..m).map(|j| powers[k][i][j] * z[f][j]).sum();
                        next[g][i] += a * s;
                    }
                }
            }
        }
        offset += fi * fo * kl;
        let a = if l + 1 == cfg.layers() { cfg.output } else { cfg.hidden };
        z = next.into_iter().map(|v| v.into_iter().map(|y| act(a, y)).collect()).collect();
    }
    z.pop().unwrap()
}

pub fn log_bernoulli(transmit: &[bool], probs: &[f64]) -> f64 {
    transmit
        .iter()
        .zip(probs)
        .map(|(&b, &q)| {
            let q = q.clamp(1e-6, 1.0 - 1e-6);
            if b {
                q.ln()
            } else {
                (1.0 - q).ln()
            }
        })
        .sum()
}

/// Central differences of `log Ψ(transmit | A)` over every tap, through the naive forward.
pub fn fd_log_policy(params: &FilterTensor, h: &ChannelMatrix, x: &[f64], transmit: &[bool], step: f64) -> Vec<f64> {
    let base = params.as_slice().to_vec();
    (0..base.len())
        .map(|i| {
            let eval = |delta: f64| {
                let mut t = base.clone();
                t[i] += delta;
                let p = FilterTensor::from_flat(params.config().clone(), t).unwrap();
                log_bernoulli(transmit, &naive_forward(&p, h, x))
            };
            (eval(step) - eval(-step)) / (2.0 * step)
        })
        .collect()
}

/// `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let d = a.abs().max(b.abs());
    if d == 0.0 {
        0.0
    } else {
        (a - b).abs() / d
    }
}
