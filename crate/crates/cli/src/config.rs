//! Experiment configuration file and its resolution into core types.

use std::path::{Path, PathBuf};

use regnn::adam::AdamSettings;
use regnn::rng::{stream, Stream};
use regnn::wireless::{generate_adhoc, generate_multicell, TopologyKind};
use regnn::{AllocationSpec, NetworkModel, ProblemSpec, RegnnConfig, TrainConfig, Variant};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CoreContext, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub m: usize,
    /// Receivers; only used by multicell topologies. Defaults to `m`.
    pub n: Option<usize>,
    pub density_factor: f64,
    /// Size the area scaling is anchored to. Defaults to `m`.
    pub size_ref: Option<usize>,
    pub kind: TopologyKind,
    pub seed: u64,
    /// Load the topology from this file instead of generating it.
    pub file: Option<PathBuf>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            m: 20,
            n: None,
            density_factor: 1.0,
            size_ref: None,
            kind: TopologyKind::Adhoc,
            seed: 0,
            file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemSection {
    pub variant: Variant,
    pub sigma2: f64,
    /// Total power budget. Defaults to `m/2`; transfer runs keep the per-node share.
    pub p_max: Option<f64>,
    pub p0: f64,
    pub demand_mean: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            variant: Variant::SumRateBudget,
            sigma2: 1.0,
            p_max: None,
            p0: 1.0,
            demand_mean: 0.05,
        }
    }
}

/// Training hyperparameters; evaluation cadence lives in the output section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub iters: usize,
    pub primal_step: f64,
    pub dual_step0: f64,
    pub dual_decay: f64,
    pub adam: AdamSettings,
    pub batch: usize,
    pub seed: u64,
    pub reward_baseline: bool,
    pub baseline_decay: f64,
    pub warm_start: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            iters: t.iters,
            primal_step: t.primal_step,
            dual_step0: t.dual_step0,
            dual_decay: t.dual_decay,
            adam: t.adam,
            batch: t.batch,
            seed: t.seed,
            reward_baseline: t.reward_baseline,
            baseline_decay: t.baseline_decay,
            warm_start: t.warm_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub eval_every: usize,
    pub eval_samples: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            dir: PathBuf::from("runs"),
            eval_every: t.eval_every,
            eval_samples: t.eval_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransferSection {
    pub sizes: Vec<usize>,
    pub densities: Vec<f64>,
    pub networks_per_size: usize,
    pub samples: usize,
}

impl Default for TransferSection {
    fn default() -> Self {
        Self {
            sizes: vec![75, 100],
            densities: vec![1.0],
            networks_per_size: 50,
            samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub network: NetworkSection,
    pub problem: ProblemSection,
    pub regnn: RegnnConfig,
    pub train: TrainSection,
    pub output: OutputSection,
    pub transfer: TransferSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            network: NetworkSection::default(),
            problem: ProblemSection::default(),
            regnn: RegnnConfig::uniform(8, 1, 5),
            train: TrainSection::default(),
            output: OutputSection::default(),
            transfer: TransferSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.resolve()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Fills every defaulted size-dependent field and validates the result.
    pub fn resolve(mut self) -> Result<Self> {
        let m = self.network.m;
        if m == 0 {
            return Err(CliError::invalid("network.m", "must be positive"));
        }
        self.network.n.get_or_insert(m);
        self.network.size_ref.get_or_insert(m);
        self.problem.p_max.get_or_insert(m as f64 / 2.0);
        if !(self.network.density_factor > 0.0 && self.network.density_factor.is_finite()) {
            return Err(CliError::invalid("network.density_factor", "must be positive"));
        }
        if self.network.size_ref == Some(0) {
            return Err(CliError::invalid("network.size_ref", "must be positive"));
        }
        if self.network.kind == TopologyKind::Multicell {
            let n = self.network.n.unwrap_or(m);
            if n == 0 || !m.is_multiple_of(n) {
                return Err(CliError::invalid("network.n", format!("{n} cells must evenly divide m = {m}")));
            }
        }
        self.problem_spec()
            .validate()
            .map_err(|e| CliError::invalid("problem", e.to_string()))?;
        self.regnn
            .validate()
            .map_err(|e| CliError::invalid("regnn", e.to_string()))?;
        self.train_config()
            .validate()
            .map_err(|e| CliError::invalid("train", e.to_string()))?;
        if self.output.eval_every == 0 {
            return Err(CliError::invalid("output.eval_every", "must be positive"));
        }
        if self.output.eval_samples == 0 {
            return Err(CliError::invalid("output.eval_samples", "must be positive"));
        }
        if self.transfer.sizes.iter().any(|&s| s < 2) {
            return Err(CliError::invalid("transfer.sizes", "every size must be at least 2"));
        }
        if self.transfer.densities.is_empty() || self.transfer.densities.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(CliError::invalid("transfer.densities", "need at least one positive density"));
        }
        if self.transfer.samples == 0 {
            return Err(CliError::invalid("transfer.samples", "must be positive"));
        }
        Ok(self)
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        self.problem_for(self.network.m)
    }

    /// Problem on a network of `m` nodes, keeping the per-node budget share.
    pub fn problem_for(&self, m: usize) -> ProblemSpec {
        let base = self.network.m as f64;
        let p_max = self.problem.p_max.unwrap_or(base / 2.0) * m as f64 / base;
        ProblemSpec {
            sigma2: self.problem.sigma2,
            p_max,
            alloc: AllocationSpec { p0: self.problem.p0 },
            variant: self.problem.variant,
            demand_mean: self.problem.demand_mean,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            iters: t.iters,
            primal_step: t.primal_step,
            dual_step0: t.dual_step0,
            dual_decay: t.dual_decay,
            adam: t.adam,
            batch: t.batch,
            seed: t.seed,
            eval_every: self.output.eval_every,
            eval_samples: self.output.eval_samples,
            reward_baseline: t.reward_baseline,
            baseline_decay: t.baseline_decay,
            warm_start: t.warm_start,
        }
    }

    pub fn size_ref(&self) -> usize {
        self.network.size_ref.unwrap_or(self.network.m)
    }

    /// Loads the configured topology file, or draws one from the topology stream.
    pub fn network(&self) -> Result<NetworkModel> {
        if let Some(path) = &self.network.file {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let net = NetworkModel::from_json(&text).context("topology file")?;
            if net.m() != self.network.m {
                return Err(CliError::invalid(
                    "network.file",
                    format!("topology has {} pairs, config says m = {}", net.m(), self.network.m),
                ));
            }
            return Ok(net);
        }
        let mut rng = stream(self.network.seed, Stream::Topology);
        let m = self.network.m;
        match self.network.kind {
            TopologyKind::Adhoc => generate_adhoc(m, &mut rng, self.network.density_factor, self.size_ref()),
            TopologyKind::Multicell => generate_multicell(m, self.network.n.unwrap_or(m), &mut rng),
        }
        .context("network generation")
    }

    /// Canonical JSON of the resolved config.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// SHA-256 over the canonical config and a command descriptor.
    pub fn hash_with(&self, command: &str) -> Result<String> {
        let mut h = Sha256::new();
        h.update(self.canonical_json()?.as_bytes());
        h.update(b"\n");
        h.update(command.as_bytes());
        Ok(hex::encode(h.finalize()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_resolves_to_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg.network.m, 20);
        assert_eq!(cfg.problem.p_max, Some(10.0));
        assert_eq!(cfg.network.size_ref, Some(20));
        assert_eq!(regnn::num_params(&cfg.regnn), 40);
        assert_eq!(cfg.train_config(), TrainConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("[train]\nprimal_stepp = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("primal_stepp"), "{err}");
        assert!(ExperimentConfig::from_toml("[plots]\nx = 1\n").is_err());
    }

    #[test]
    fn invalid_values_name_the_field() {
        let err = ExperimentConfig::from_toml("[problem]\nsigma2 = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("`problem`"), "{err}");
        let err = ExperimentConfig::from_toml("[network]\nm = 10\nkind = \"multicell\"\nn = 3\n").unwrap_err();
        assert!(err.to_string().contains("network.n"), "{err}");
    }

    #[test]
    fn budget_share_scales_with_size() {
        let cfg = ExperimentConfig::from_toml("[network]\nm = 50\n").unwrap();
        assert_eq!(cfg.problem_for(100).p_max, 50.0);
        assert_eq!(cfg.problem_for(50).p_max, 25.0);
    }

    #[test]
    fn hash_depends_on_config_and_command() {
        let a = ExperimentConfig::default().resolve().unwrap();
        let mut b = a.clone();
        b.train.seed = 1;
        assert_ne!(a.hash_with("train").unwrap(), b.hash_with("train").unwrap());
        assert_ne!(a.hash_with("train").unwrap(), a.hash_with("eval").unwrap());
        assert_eq!(a.hash_with("train").unwrap(), a.clone().hash_with("train").unwrap());
    }
}
