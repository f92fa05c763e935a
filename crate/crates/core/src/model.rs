//! Random-edge graph neural network: layered graph-filter banks with pointwise
//! nonlinearities, evaluated on a channel matrix that changes every draw.
//!
//! Layer `l` maps `F_{l-1}` input features to `F_l` output features through
//! `z_l^g = σ_l(Σ_f Σ_k α_{lk}^{fg} Hᵏ z_{l-1}^f)`. Hidden layers use the
//! configured hidden activation; the last layer uses the output sigmoid so
//! the network emits per-node probabilities. There are no bias terms.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::consts::{FLOAT_DIGITS, FORMAT_VERSION, TAP_INIT_RANGE};
use crate::error::{Error, Result};
use crate::graph::{shifted_powers, ChannelMatrix, GraphSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Abs,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, y: f64) -> f64 {
        match self {
            Activation::Relu => y.max(0.0),
            Activation::Abs => y.abs(),
            Activation::Sigmoid => sigmoid(y),
        }
    }

    /// Derivative given the pre-activation `y` and the activation value `z`.
    /// Kinks use subgradient 0.
    #[inline]
    pub fn derivative(self, y: f64, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Abs => {
                if y > 0.0 {
                    1.0
                } else if y < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => z * (1.0 - z),
        }
    }
}

#[inline]
pub fn sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

/// How [`FilterTensor::init`] draws the starting taps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TapInit {
    /// i.i.d. uniform on `[-0.1, 0.1]`.
    Uniform,
    /// Uniform noise plus a unit zero-order tap on each hidden layer's
    /// matching feature pairs, so hidden layers start near the identity.
    #[default]
    Passthrough,
}

/// Architecture: layer widths `F_0..F_L` and filter lengths `K_1..K_L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegnnConfig {
    pub features: Vec<usize>,
    pub taps: Vec<usize>,
    #[serde(default = "default_hidden")]
    pub hidden: Activation,
    #[serde(default = "default_output")]
    pub output: Activation,
    #[serde(default)]
    pub init: TapInit,
}

fn default_hidden() -> Activation {
    Activation::Relu
}

fn default_output() -> Activation {
    Activation::Sigmoid
}

impl RegnnConfig {
    /// `L` layers of `F` features with length-`K` filters; input and output stay single-feature.
    pub fn uniform(layers: usize, features: usize, taps: usize) -> Self {
        let mut f = vec![features; layers + 1];
        f[0] = 1;
        f[layers] = 1;
        Self {
            features: f,
            taps: vec![taps; layers],
            hidden: Activation::Relu,
            output: Activation::Sigmoid,
            init: TapInit::default(),
        }
    }

    pub fn layers(&self) -> usize {
        self.taps.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.taps.len();
        if l == 0 {
            return Err(Error::InvalidConfig("need at least one layer".into()));
        }
        if self.features.len() != l + 1 {
            return Err(Error::InvalidConfig(format!(
                "{l} layers need {} feature counts, got {}",
                l + 1,
                self.features.len()
            )));
        }
        if self.features[0] != 1 || self.features[l] != 1 {
            return Err(Error::InvalidConfig(
                "input and output must be single-feature".into(),
            ));
        }
        if self.features.contains(&0) || self.taps.contains(&0) {
            return Err(Error::InvalidConfig(
                "feature counts and filter lengths must be positive".into(),
            ));
        }
        if self.output != Activation::Sigmoid {
            return Err(Error::InvalidConfig("output activation must be sigmoid".into()));
        }
        Ok(())
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers() {
            self.output
        } else {
            self.hidden
        }
    }

    fn layer_offset(&self, layer: usize) -> usize {
        (0..layer)
            .map(|l| self.taps[l] * self.features[l] * self.features[l + 1])
            .sum()
    }
}

/// Total tap count `Σ_l K_l·F_{l-1}·F_l`; independent of network size.
pub fn num_params(config: &RegnnConfig) -> usize {
    config.layer_offset(config.layers())
}

/// All filter taps, flattened in `(layer, in_feature, out_feature, order)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTensor {
    config: RegnnConfig,
    taps: Vec<f64>,
}

impl FilterTensor {
    pub fn zeros(config: RegnnConfig) -> Result<Self> {
        config.validate()?;
        let n = num_params(&config);
        Ok(Self {
            config,
            taps: vec![0.0; n],
        })
    }

    /// i.i.d. uniform taps on `[-0.1, 0.1]`.
    pub fn random<R: Rng + ?Sized>(config: RegnnConfig, rng: &mut R) -> Result<Self> {
        let mut t = Self::zeros(config)?;
        let dist = Uniform::new_inclusive(-TAP_INIT_RANGE, TAP_INIT_RANGE).expect("valid range");
        t.taps.iter_mut().for_each(|v| *v = dist.sample(rng));
        Ok(t)
    }

    /// Starting taps according to `config.init`.
    pub fn init<R: Rng + ?Sized>(config: RegnnConfig, rng: &mut R) -> Result<Self> {
        let mut t = Self::random(config, rng)?;
        if t.config.init == TapInit::Passthrough {
            let cfg = t.config.clone();
            for l in 0..cfg.layers() - 1 {
                for f in 0..cfg.features[l].min(cfg.features[l + 1]) {
                    let i = t.index(l, f, f, 0);
                    t.taps[i] += 1.0;
                }
            }
        }
        Ok(t)
    }

    pub fn from_flat(config: RegnnConfig, taps: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let n = num_params(&config);
        if taps.len() != n {
            return Err(Error::InvalidConfig(format!(
                "expected {n} taps, got {}",
                taps.len()
            )));
        }
        if taps.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("taps must be finite".into()));
        }
        Ok(Self { config, taps })
    }

    pub fn config(&self) -> &RegnnConfig {
        &self.config
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.taps
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn index(&self, layer: usize, f: usize, g: usize, k: usize) -> usize {
        let c = &self.config;
        let (fo, ko) = (c.features[layer + 1], c.taps[layer]);
        c.layer_offset(layer) + (f * fo + g) * ko + k
    }

    /// The `K_l` taps of filter `(layer, f, g)`.
    pub fn filter(&self, layer: usize, f: usize, g: usize) -> &[f64] {
        let start = self.index(layer, f, g, 0);
        &self.taps[start..start + self.config.taps[layer]]
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            taps: vec![0.0; self.taps.len()],
        }
    }

    pub fn is_same_shape(&self, other: &FilterTensor) -> bool {
        self.config == other.config
    }
}

/// Intermediates of one forward evaluation, kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct ForwardTape {
    dim: usize,
    /// `powers[l][f][k] = Hᵏ z_{l-1}^f`; `k = 0` is the layer input itself.
    powers: Vec<Vec<Vec<Vec<f64>>>>,
    /// Pre-activation sums `y_l^g`.
    pre: Vec<Vec<Vec<f64>>>,
    /// Post-activation outputs `z_l^g`.
    post: Vec<Vec<Vec<f64>>>,
    output_activation: Activation,
}

impl ForwardTape {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn output(&self) -> &[f64] {
        &self.post.last().expect("at least one layer")[0]
    }

    /// Recomputes the network output from the cached final pre-activation.
    pub fn replay_output(&self) -> Vec<f64> {
        self.pre.last().expect("at least one layer")[0]
            .iter()
            .map(|&y| self.output_activation.apply(y))
            .collect()
    }

    fn matches(&self, config: &RegnnConfig) -> bool {
        self.powers.len() == config.layers()
            && self.powers.iter().enumerate().all(|(l, p)| {
                p.len() == config.features[l]
                    && p.iter().all(|ks| ks.len() == config.taps[l])
                    && self.pre[l].len() == config.features[l + 1]
            })
    }
}

/// Evaluates the network on `(H, x)` and returns per-node probabilities with
/// the tape needed by [`backward`].
pub fn forward(
    params: &FilterTensor,
    h: &ChannelMatrix,
    x: &GraphSignal,
) -> Result<(GraphSignal, ForwardTape)> {
    let m = h.dim();
    if x.dim() != m {
        return Err(Error::DimensionMismatch {
            what: "input signal",
            left: x.dim(),
            right: m,
        });
    }
    if x.features() != 1 {
        return Err(Error::InvalidConfig(format!(
            "input must be single-feature, got {} features",
            x.features()
        )));
    }
    let config = params.config();
    let layers = config.layers();
    let mut tape = ForwardTape {
        dim: m,
        powers: Vec::with_capacity(layers),
        pre: Vec::with_capacity(layers),
        post: Vec::with_capacity(layers),
        output_activation: config.output,
    };
    let mut input: Vec<Vec<f64>> = vec![x.feature(0).to_vec()];
    for l in 0..layers {
        let k_len = config.taps[l];
        let f_out = config.features[l + 1];
        let powers: Vec<Vec<Vec<f64>>> = input
            .iter()
            .map(|z| shifted_powers(h, z, k_len))
            .collect();
        let mut pre = vec![vec![0.0; m]; f_out];
        for (f, pf) in powers.iter().enumerate() {
            for (g, y) in pre.iter_mut().enumerate() {
                for (tap, hz) in params.filter(l, f, g).iter().zip(pf) {
                    for (yi, v) in y.iter_mut().zip(hz) {
                        *yi += tap * v;
                    }
                }
            }
        }
        let act = config.activation(l);
        let post: Vec<Vec<f64>> = pre
            .iter()
            .map(|y| y.iter().map(|&v| act.apply(v)).collect())
            .collect();
        if pre.iter().flatten().any(|v| !v.is_finite())
            || powers.iter().flatten().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite { layer: l + 1 });
        }
        input = post.clone();
        tape.powers.push(powers);
        tape.pre.push(pre);
        tape.post.push(post);
    }
    let probs = GraphSignal::from_vec(tape.output().to_vec());
    Ok((probs, tape))
}

/// Forward pass without keeping the tape.
pub fn evaluate(params: &FilterTensor, h: &ChannelMatrix, x: &GraphSignal) -> Result<GraphSignal> {
    forward(params, h, x).map(|(p, _)| p)
}

/// Reverse-mode gradient of `grad_outᵀ·output` with respect to every tap.
///
/// The gradient of tap `(l, f, g, k)` is `⟨δ_l^g, Hᵏ z_{l-1}^f⟩`; the error
/// signal is carried to the previous layer through the filter adjoint
/// `Σ_k α_k (Hᵀ)ᵏ`, evaluated by Horner's rule on the transpose.
pub fn backward(
    tape: &ForwardTape,
    params: &FilterTensor,
    h: &ChannelMatrix,
    grad_out: &GraphSignal,
) -> Result<FilterTensor> {
    let config = params.config();
    if !tape.matches(config) {
        return Err(Error::TapeMismatch(
            "tape layer shapes differ from the filter tensor".into(),
        ));
    }
    let m = tape.dim;
    if h.dim() != m || grad_out.dim() != m || grad_out.features() != 1 {
        return Err(Error::TapeMismatch(format!(
            "tape dim {m}, channel dim {}, gradient dim {}x{}",
            h.dim(),
            grad_out.dim(),
            grad_out.features()
        )));
    }
    let mut grad = params.zeros_like();
    let layers = config.layers();

    let last = layers - 1;
    let mut delta: Vec<Vec<f64>> = vec![(0..m)
        .map(|i| {
            grad_out.values()[i]
                * config
                    .activation(last)
                    .derivative(tape.pre[last][0][i], tape.post[last][0][i])
        })
        .collect()];

    let mut scratch = vec![0.0; m];
    for l in (0..layers).rev() {
        let k_len = config.taps[l];
        let f_in = config.features[l];
        for f in 0..f_in {
            for (g, d) in delta.iter().enumerate() {
                for k in 0..k_len {
                    let idx = grad.index(l, f, g, k);
                    grad.taps[idx] = dot(d, &tape.powers[l][f][k]);
                }
            }
        }
        if l == 0 {
            break;
        }
        let act = config.activation(l - 1);
        let mut next = Vec::with_capacity(f_in);
        for f in 0..f_in {
            // c_k = Σ_g α_{lk}^{fg} δ^g, then Σ_k (Hᵀ)ᵏ c_k by Horner.
            let coeff = |k: usize| -> Vec<f64> {
                let mut c = vec![0.0; m];
                for (g, d) in delta.iter().enumerate() {
                    let a = params.filter(l, f, g)[k];
                    for (ci, di) in c.iter_mut().zip(d) {
                        *ci += a * di;
                    }
                }
                c
            };
            let mut acc = coeff(k_len - 1);
            for k in (0..k_len - 1).rev() {
                h.shift_transpose_into(&acc, &mut scratch);
                let c = coeff(k);
                for ((a, s), ci) in acc.iter_mut().zip(&scratch).zip(&c) {
                    *a = s + ci;
                }
            }
            let pre = &tape.pre[l - 1][f];
            let post = &tape.post[l - 1][f];
            for i in 0..m {
                acc[i] *= act.derivative(pre[i], post[i]);
            }
            next.push(acc);
        }
        delta = next;
    }
    Ok(grad)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Serialize)]
struct CheckpointOut<'a> {
    format_version: u32,
    config: &'a RegnnConfig,
    taps: Box<RawValue>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointIn {
    format_version: u32,
    config: RegnnConfig,
    taps: Vec<f64>,
}

/// Formats a float with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{:.*e}", FLOAT_DIGITS - 1, v)
}

impl FilterTensor {
    /// Serializes to the versioned JSON checkpoint format.
    pub fn to_checkpoint(&self) -> Result<String> {
        let body = self
            .taps
            .iter()
            .map(|v| format_float(*v))
            .collect::<Vec<_>>()
            .join(", ");
        let out = CheckpointOut {
            format_version: FORMAT_VERSION,
            config: &self.config,
            taps: RawValue::from_string(format!("[{body}]"))?,
        };
        Ok(serde_json::to_string_pretty(&out)? + "\n")
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let parsed: CheckpointIn = serde_json::from_str(text)?;
        if parsed.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {}",
                parsed.format_version
            )));
        }
        Self::from_flat(parsed.config, parsed.taps)
    }
}
