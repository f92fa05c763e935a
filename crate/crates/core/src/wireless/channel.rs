use rand::Rng;

use super::NetworkModel;
use crate::consts::RAYLEIGH_SCALE;
use crate::graph::ChannelMatrix;

/// One fading realisation `h_ij = h^p_ij · h^f_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingSample {
    pub h: ChannelMatrix,
    pub draw_id: u64,
}

/// Draws Rayleigh fast fading with unit mean power over the model's path loss.
pub fn sample_fading<R: Rng + ?Sized>(model: &NetworkModel, rng: &mut R, draw_id: u64) -> FadingSample {
    sample_fading_with_scale(model, RAYLEIGH_SCALE, rng, draw_id)
}

pub fn sample_fading_with_scale<R: Rng + ?Sized>(
    model: &NetworkModel,
    scale: f64,
    rng: &mut R,
    draw_id: u64,
) -> FadingSample {
    let m = model.m();
    let entries = model
        .pathloss_entries()
        .iter()
        .map(|&pl| pl * rayleigh(scale, rng))
        .collect();
    FadingSample {
        h: ChannelMatrix::new(m, entries).expect("fading gains are finite and nonnegative"),
        draw_id,
    }
}

// Inverse-CDF draw; 1 - U lies in (0, 1] so the log is finite.
fn rayleigh<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    scale * (-2.0 * u.ln()).sqrt()
}

/// Per-node Shannon rate in nats with squared channel gains:
/// `ln(1 + h_ii² p_i / (σ² + Σ_{j≠i} h_ji² p_j))`.
pub fn capacity(p: &[f64], h: &ChannelMatrix, sigma2: f64) -> Vec<f64> {
    let m = h.dim();
    debug_assert_eq!(p.len(), m);
    let mut interference = vec![0.0; m];
    for (j, &pj) in p.iter().enumerate() {
        if pj == 0.0 {
            continue;
        }
        for (i, (g, acc)) in h.row(j).iter().zip(interference.iter_mut()).enumerate() {
            if i != j {
                *acc += g * g * pj;
            }
        }
    }
    (0..m)
        .map(|i| (1.0 + h.get(i, i).powi(2) * p[i] / (sigma2 + interference[i])).ln())
        .collect()
}

pub fn sum_rate(p: &[f64], h: &ChannelMatrix, sigma2: f64) -> f64 {
    capacity(p, h, sigma2).iter().sum()
}
