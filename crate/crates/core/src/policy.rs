//! Bernoulli allocation policy driven by the network's per-node probabilities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::consts::PROB_CLAMP;
use crate::error::{Error, Result};
use crate::graph::GraphSignal;

/// Binary power levels: each node transmits at `p0` watts or stays silent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationSpec {
    pub p0: f64,
}

impl AllocationSpec {
    pub fn new(p0: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0.is_finite()) {
            return Err(Error::InvalidProblem(format!("p0 must be positive, got {p0}")));
        }
        Ok(Self { p0 })
    }
}

/// One draw from the policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySample {
    pub allocation: Vec<f64>,
    pub log_prob: f64,
    pub transmit: Vec<bool>,
}

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Draws each node independently with probability `clamp(probs_i)`.
pub fn sample<R: Rng + ?Sized>(probs: &GraphSignal, spec: AllocationSpec, rng: &mut R) -> PolicySample {
    let mut transmit = Vec::with_capacity(probs.dim());
    let mut log_prob = 0.0;
    for &p in probs.feature(0) {
        let q = clamp_prob(p);
        let b = rng.random::<f64>() < q;
        log_prob += if b { q.ln() } else { (1.0 - q).ln() };
        transmit.push(b);
    }
    PolicySample {
        allocation: transmit.iter().map(|&b| if b { spec.p0 } else { 0.0 }).collect(),
        log_prob,
        transmit,
    }
}

/// Log-likelihood of a transmit pattern under `probs`.
pub fn log_prob(transmit: &[bool], probs: &GraphSignal) -> f64 {
    transmit
        .iter()
        .zip(probs.feature(0))
        .map(|(&b, &p)| {
            let q = clamp_prob(p);
            if b {
                q.ln()
            } else {
                (1.0 - q).ln()
            }
        })
        .sum()
}

/// Score `∂ log Ψ / ∂probs`: `b/q − (1−b)/(1−q)` per node.
pub fn grad_log_prob(sample: &PolicySample, probs: &GraphSignal) -> GraphSignal {
    GraphSignal::from_vec(
        sample
            .transmit
            .iter()
            .zip(probs.feature(0))
            .map(|(&b, &p)| {
                let q = clamp_prob(p);
                if b {
                    1.0 / q
                } else {
                    -1.0 / (1.0 - q)
                }
            })
            .collect(),
    )
}

/// Deterministic execution: transmit iff the probability exceeds one half.
pub fn threshold(probs: &GraphSignal, spec: AllocationSpec) -> Vec<f64> {
    probs
        .feature(0)
        .iter()
        .map(|&p| if clamp_prob(p) > 0.5 { spec.p0 } else { 0.0 })
        .collect()
}
