//! Model-free primal-dual training of the filter tensor.
//!
//! Each iteration samples channel and node states, probes the reward of a
//! policy draw, and then updates the reward estimate `r`, the multipliers
//! `λ` and `μ`, and the filter tensor (through the likelihood-ratio score).
//! The reward function is reached only through [`ExtendedProblem::probe`].

use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamSettings};
use crate::consts::EVAL_SAMPLES;
use crate::error::{Error, Result};
use crate::graph::{ChannelMatrix, GraphSignal};
use crate::policy::{self, AllocationSpec};
use crate::model::{self, FilterTensor, RegnnConfig};
use crate::rng::{self, Rng, Stream};
use crate::wireless::{capacity, sample_demand, sample_fading, NetworkModel, ProblemSpec, Variant};

type RewardFn = Box<dyn Fn(&[f64], &ChannelMatrix, &[f64]) -> Vec<f64> + Send + Sync>;

/// A problem rewritten in the `u₀(r)`, `u(r) ≥ 0`, `r = E[f̃]` template.
///
/// For the budget variant the total transmit power is appended as reward
/// component `m+1` and the budget becomes `P_max − r_{m+1} ≥ 0`. For the
/// demand variant the constraints are `r − E[x] ≥ 0`, with `E[x]` tracked
/// by a running estimate.
pub struct ExtendedProblem {
    variant: Variant,
    m: usize,
    p_max: f64,
    demand_mean: f64,
    alloc: AllocationSpec,
    reward: RewardFn,
    demand_estimate: Option<Vec<f64>>,
}

impl std::fmt::Debug for ExtendedProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExtendedProblem")
            .field("variant", &self.variant)
            .field("m", &self.m)
            .field("p_max", &self.p_max)
            .finish_non_exhaustive()
    }
}

pub fn extend_problem(problem: &ProblemSpec, m: usize) -> Result<ExtendedProblem> {
    problem.validate()?;
    let sigma2 = problem.sigma2;
    let reward: RewardFn = match problem.variant {
        Variant::SumRateBudget => Box::new(move |p, h, _x| {
            let mut r = capacity(p, h, sigma2);
            r.push(p.iter().sum());
            r
        }),
        Variant::DemandConstrained => Box::new(move |p, h, _x| capacity(p, h, sigma2)),
    };
    Ok(ExtendedProblem {
        variant: problem.variant,
        m,
        p_max: problem.p_max,
        demand_mean: problem.demand_mean,
        alloc: problem.alloc,
        reward,
        demand_estimate: None,
    })
}

impl ExtendedProblem {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn nodes(&self) -> usize {
        self.m
    }

    pub fn alloc(&self) -> AllocationSpec {
        self.alloc
    }

    pub fn reward_dim(&self) -> usize {
        match self.variant {
            Variant::SumRateBudget => self.m + 1,
            Variant::DemandConstrained => self.m,
        }
    }

    pub fn constraint_dim(&self) -> usize {
        match self.variant {
            Variant::SumRateBudget => 1,
            Variant::DemandConstrained => self.m,
        }
    }

    /// Black-box reward observation for allocation `p` in state `(H, x)`.
    pub fn probe(&self, p: &[f64], h: &ChannelMatrix, x: &[f64]) -> Vec<f64> {
        (self.reward)(p, h, x)
    }

    /// Sum-rate utility `Σ_{i≤m} r_i`.
    pub fn utility(&self, r: &[f64]) -> f64 {
        r[..self.m].iter().sum()
    }

    pub fn utility_grad(&self, _r: &[f64]) -> Vec<f64> {
        let mut g = vec![1.0; self.m];
        g.resize(self.reward_dim(), 0.0);
        g
    }

    pub fn constraints(&self, r: &[f64]) -> Vec<f64> {
        match self.variant {
            Variant::SumRateBudget => vec![self.p_max - r[self.m]],
            Variant::DemandConstrained => {
                let d = self.demand_estimate();
                r.iter().zip(&d).map(|(ri, di)| ri - di).collect()
            }
        }
    }

    /// `(∇u(r)) μ`, a vector in reward space.
    pub fn constraint_grad_times(&self, _r: &[f64], mu: &[f64]) -> Vec<f64> {
        match self.variant {
            Variant::SumRateBudget => {
                let mut g = vec![0.0; self.m + 1];
                g[self.m] = -mu[0];
                g
            }
            Variant::DemandConstrained => mu.to_vec(),
        }
    }

    /// Current estimate of the mean demand `E[x]`.
    pub fn demand_estimate(&self) -> Vec<f64> {
        self.demand_estimate
            .clone()
            .unwrap_or_else(|| vec![0.0; self.m])
    }

    /// Folds a batch-mean node state into the running demand estimate.
    pub fn observe_state(&mut self, x_mean: &[f64], step: f64) {
        if self.variant != Variant::DemandConstrained {
            return;
        }
        match &mut self.demand_estimate {
            None => self.demand_estimate = Some(x_mean.to_vec()),
            Some(est) => {
                for (e, x) in est.iter_mut().zip(x_mean) {
                    *e += step * (x - *e);
                }
            }
        }
    }

    /// Node-state input: sampled demands, or all ones when the problem has none.
    pub fn sample_state(&self, rng: &mut Rng) -> Result<Vec<f64>> {
        match self.variant {
            Variant::SumRateBudget => Ok(vec![1.0; self.m]),
            Variant::DemandConstrained => sample_demand(self.m, self.demand_mean, rng),
        }
    }
}

/// Lagrangian variables of the extended problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub r: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

impl DualState {
    pub fn zeros(problem: &ExtendedProblem) -> Self {
        Self {
            r: vec![0.0; problem.reward_dim()],
            lambda: vec![0.0; problem.reward_dim()],
            mu: vec![0.0; problem.constraint_dim()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iters: usize,
    pub primal_step: f64,
    pub dual_step0: f64,
    pub dual_decay: f64,
    pub adam: AdamSettings,
    pub batch: usize,
    pub seed: u64,
    pub eval_every: usize,
    pub eval_samples: usize,
    /// Subtract a moving average of the score weight (variance reduction).
    pub reward_baseline: bool,
    pub baseline_decay: f64,
    /// Start `r` at the first observed reward and `λ` at `∇u₀(r)` instead of zero.
    pub warm_start: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iters: 20_000,
            primal_step: 1e-3,
            dual_step0: 1e-2,
            dual_decay: 0.9998,
            adam: AdamSettings::default(),
            batch: 1,
            seed: 0,
            eval_every: 1000,
            eval_samples: EVAL_SAMPLES,
            reward_baseline: false,
            baseline_decay: 0.99,
            warm_start: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.primal_step >= 0.0 && self.dual_step0 >= 0.0) {
            return bad("step sizes must be nonnegative".into());
        }
        if !(self.dual_decay > 0.0 && self.dual_decay <= 1.0) {
            return bad(format!("dual_decay must lie in (0, 1], got {}", self.dual_decay));
        }
        if self.batch == 0 {
            return bad("batch must be at least 1".into());
        }
        if self.eval_every == 0 || self.eval_samples == 0 {
            return bad("eval_every and eval_samples must be positive".into());
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return bad("baseline_decay must lie in [0, 1)".into());
        }
        Ok(())
    }
}

/// Geometric step schedule `ε_k = ε₀·decay^k`.
#[derive(Debug, Clone, Copy)]
pub struct DualSchedule {
    current: f64,
    decay: f64,
}

impl DualSchedule {
    pub fn new(step0: f64, decay: f64) -> Self {
        Self {
            current: step0,
            decay,
        }
    }

    pub fn step(&self) -> f64 {
        self.current
    }

    pub fn advance(&mut self) {
        self.current *= self.decay;
    }
}

/// One channel/state draw used by a training step.
#[derive(Debug, Clone)]
pub struct StateSample {
    pub h: ChannelMatrix,
    pub x: Vec<f64>,
}

/// What a step observed, for logging.
#[derive(Debug, Clone, PartialEq)]
pub struct StepStats {
    pub mean_reward: Vec<f64>,
    pub sum_rate: f64,
}

/// Mutable optimiser state carried between steps.
#[derive(Debug, Clone)]
pub struct PrimalState {
    pub params: FilterTensor,
    pub adam: Adam,
    pub baseline: Option<f64>,
}

impl PrimalState {
    pub fn new(params: FilterTensor, adam: AdamSettings) -> Self {
        let adam = Adam::new(params.len(), adam);
        Self {
            params,
            adam,
            baseline: None,
        }
    }
}

/// Step sizes for one iteration.
#[derive(Debug, Clone, Copy)]
pub struct Steps {
    pub dual: f64,
    pub primal: f64,
}

/// One primal-dual iteration over a batch of state draws. All updates use
/// the iterate values from before the step.
pub fn primal_dual_step(
    state: &mut DualState,
    primal: &mut PrimalState,
    batch: &[StateSample],
    problem: &ExtendedProblem,
    steps: Steps,
    config: &TrainConfig,
    policy_rng: &mut Rng,
) -> Result<StepStats> {
    let dim = problem.reward_dim();
    let mut mean_reward = vec![0.0; dim];
    let mut grad = vec![0.0; primal.params.len()];
    let inv = 1.0 / batch.len() as f64;
    let mut weights = Vec::with_capacity(batch.len());
    let mut scores = Vec::with_capacity(batch.len());
    for s in batch {
        let x = GraphSignal::from_vec(s.x.clone());
        let (probs, tape) = model::forward(&primal.params, &s.h, &x)?;
        let draw = policy::sample(&probs, problem.alloc(), policy_rng);
        let observed = problem.probe(&draw.allocation, &s.h, &s.x);
        let weight: f64 = observed.iter().zip(&state.lambda).map(|(f, l)| f * l).sum();
        for (acc, f) in mean_reward.iter_mut().zip(&observed) {
            *acc += f * inv;
        }
        if weight != 0.0 {
            let score = policy::grad_log_prob(&draw, &probs);
            scores.push(Some(model::backward(&tape, &primal.params, &s.h, &score)?));
        } else {
            scores.push(None);
        }
        weights.push(weight);
    }

    let mut adjusted = weights.clone();
    if config.reward_baseline {
        let mean_weight = weights.iter().sum::<f64>() * inv;
        if let Some(b) = primal.baseline {
            adjusted.iter_mut().for_each(|w| *w -= b);
        }
        primal.baseline = Some(match primal.baseline {
            None => mean_weight,
            Some(b) => config.baseline_decay * b + (1.0 - config.baseline_decay) * mean_weight,
        });
    }
    for (w, score) in adjusted.iter().zip(&scores) {
        if let Some(score) = score {
            for (g, s) in grad.iter_mut().zip(score.as_slice()) {
                *g += w * s * inv;
            }
        }
    }

    let eps = steps.dual;
    let u0_grad = problem.utility_grad(&state.r);
    let u_mu = problem.constraint_grad_times(&state.r, &state.mu);
    let slack = problem.constraints(&state.r);

    let r_next: Vec<f64> = (0..dim)
        .map(|i| state.r[i] + eps * (u0_grad[i] + u_mu[i] - state.lambda[i]))
        .collect();
    let mu_next: Vec<f64> = state
        .mu
        .iter()
        .zip(&slack)
        .map(|(m, u)| (m - eps * u).max(0.0))
        .collect();
    let lambda_next: Vec<f64> = (0..dim)
        .map(|i| state.lambda[i] - eps * (mean_reward[i] - state.r[i]))
        .collect();

    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if !(finite(&r_next) && finite(&mu_next) && finite(&lambda_next) && finite(&grad)) {
        return Err(Error::Diverged {
            iteration: 0,
            detail: "non-finite dual variables or gradient".into(),
        });
    }
    if steps.primal != 0.0 && grad.iter().any(|g| *g != 0.0) {
        primal.adam.ascend(primal.params.as_mut_slice(), &grad, steps.primal);
    }
    state.r = r_next;
    state.mu = mu_next;
    state.lambda = lambda_next;

    Ok(StepStats {
        sum_rate: problem.utility(&mean_reward),
        mean_reward,
    })
}

/// Held-out metrics at one point of training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub iteration: usize,
    /// `u₀` of the held-out mean reward under sampled execution.
    pub objective: f64,
    /// Constraint values `u(r̄)` on the held-out mean reward.
    pub slack: Vec<f64>,
    pub lambda_norm: f64,
    pub mu_norm: f64,
    pub sum_rate_sampled: f64,
    pub sum_rate_threshold: f64,
    pub mean_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub records: Vec<EvalRecord>,
    /// Observed batch sum-rate at every iteration.
    pub trace: Vec<f64>,
    /// Smallest entry of `μ` seen across all iterations.
    pub min_mu: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: FilterTensor,
    pub report: TrainReport,
    pub state: DualState,
}

/// Summary of a policy's behaviour on a fixed set of held-out draws.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub mean_reward: Vec<f64>,
    pub sum_rate_sampled: f64,
    pub sum_rate_threshold: f64,
    pub mean_power: f64,
    pub mean_state: Vec<f64>,
    /// Per-draw sampled sum-rates.
    pub per_draw: Vec<f64>,
}

/// Evaluates frozen `params` on `samples` held-out fading draws taken from
/// the dedicated evaluation streams of `seed`.
pub fn evaluate_policy(
    params: &FilterTensor,
    network: &NetworkModel,
    problem: &ExtendedProblem,
    samples: usize,
    seed: u64,
) -> Result<EvalSummary> {
    let m = network.m();
    let mut fading = rng::stream(seed, Stream::FadingEval);
    let mut demand = rng::substream(seed, Stream::Demand, 1);
    let mut draws = rng::substream(seed, Stream::Policy, 1);
    let dim = problem.reward_dim();
    let mut out = EvalSummary {
        mean_reward: vec![0.0; dim],
        sum_rate_sampled: 0.0,
        sum_rate_threshold: 0.0,
        mean_power: 0.0,
        mean_state: vec![0.0; m],
        per_draw: Vec::with_capacity(samples),
    };
    let inv = 1.0 / samples as f64;
    for n in 0..samples {
        let h = sample_fading(network, &mut fading, n as u64).h;
        let x = problem.sample_state(&mut demand)?;
        let probs = model::evaluate(params, &h, &GraphSignal::from_vec(x.clone()))?;
        let draw = policy::sample(&probs, problem.alloc(), &mut draws);
        let reward = problem.probe(&draw.allocation, &h, &x);
        let rate = problem.utility(&reward);
        let fixed = policy::threshold(&probs, problem.alloc());
        let fixed_rate = problem.utility(&problem.probe(&fixed, &h, &x));
        for (a, r) in out.mean_reward.iter_mut().zip(&reward) {
            *a += r * inv;
        }
        for (a, v) in out.mean_state.iter_mut().zip(&x) {
            *a += v * inv;
        }
        out.sum_rate_sampled += rate * inv;
        out.sum_rate_threshold += fixed_rate * inv;
        out.mean_power += draw.allocation.iter().sum::<f64>() * inv;
        out.per_draw.push(rate);
    }
    Ok(out)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Slack of held-out constraints: budget left, or per-node rate minus mean demand.
pub fn held_out_slack(problem: &ExtendedProblem, summary: &EvalSummary) -> Vec<f64> {
    match problem.variant() {
        Variant::SumRateBudget => vec![problem.p_max - summary.mean_reward[problem.m]],
        Variant::DemandConstrained => summary
            .mean_reward
            .iter()
            .zip(&summary.mean_state)
            .map(|(r, x)| r - x)
            .collect(),
    }
}

/// Places `(r, λ)` at the stationary point of the reward subsystem for the
/// current policy: `r` at one probed reward, `λ = ∇u₀(r) + (∇u(r))μ` with `μ = 0`.
fn warm_state(
    problem: &ExtendedProblem,
    params: &FilterTensor,
    batch: &[StateSample],
    rng: &mut Rng,
) -> Result<DualState> {
    let mut r = vec![0.0; problem.reward_dim()];
    for s in batch {
        let probs = model::evaluate(params, &s.h, &GraphSignal::from_vec(s.x.clone()))?;
        let draw = policy::sample(&probs, problem.alloc(), rng);
        for (acc, f) in r.iter_mut().zip(problem.probe(&draw.allocation, &s.h, &s.x)) {
            *acc += f / batch.len() as f64;
        }
    }
    Ok(DualState {
        lambda: problem.utility_grad(&r),
        mu: vec![0.0; problem.constraint_dim()],
        r,
    })
}

/// Runs the full training loop from a seeded random initialisation.
pub fn train(
    network: &NetworkModel,
    problem: &ProblemSpec,
    regnn_config: &RegnnConfig,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let init = FilterTensor::init(regnn_config.clone(), &mut rng::stream(config.seed, Stream::Init))?;
    train_from(init, network, problem, config)
}

/// Runs the training loop from the given filter tensor.
pub fn train_from(
    init: FilterTensor,
    network: &NetworkModel,
    problem: &ProblemSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let m = network.m();
    let mut extended = extend_problem(problem, m)?;
    let mut state = DualState::zeros(&extended);
    let mut primal = PrimalState::new(init, config.adam);
    let mut schedule = DualSchedule::new(config.dual_step0, config.dual_decay);
    let mut fading = rng::stream(config.seed, Stream::FadingTrain);
    let mut demand = rng::stream(config.seed, Stream::Demand);
    let mut draws = rng::stream(config.seed, Stream::Policy);

    let mut report = TrainReport {
        records: Vec::new(),
        trace: Vec::with_capacity(config.iters),
        min_mu: f64::INFINITY,
    };
    let mut draw_id = 0u64;
    for k in 0..config.iters {
        let mut batch = Vec::with_capacity(config.batch);
        for _ in 0..config.batch {
            let h = sample_fading(network, &mut fading, draw_id).h;
            draw_id += 1;
            let x = extended.sample_state(&mut demand)?;
            batch.push(StateSample { h, x });
        }
        let x_mean: Vec<f64> = (0..m)
            .map(|i| batch.iter().map(|s| s.x[i]).sum::<f64>() / batch.len() as f64)
            .collect();
        extended.observe_state(&x_mean, schedule.step());
        if k == 0 && config.warm_start {
            state = warm_state(&extended, &primal.params, &batch, &mut draws)?;
        }
        let steps = Steps {
            dual: schedule.step(),
            primal: config.primal_step,
        };
        let stats = primal_dual_step(&mut state, &mut primal, &batch, &extended, steps, config, &mut draws)
            .map_err(|e| match e {
                Error::Diverged { detail, .. } => Error::Diverged { iteration: k, detail },
                other => other,
            })?;
        schedule.advance();
        report.trace.push(stats.sum_rate);
        report.min_mu = state.mu.iter().copied().fold(report.min_mu, f64::min);

        if (k + 1) % config.eval_every == 0 || k + 1 == config.iters {
            let summary = evaluate_policy(&primal.params, network, &extended, config.eval_samples, config.seed)?;
            report.records.push(EvalRecord {
                iteration: k + 1,
                objective: extended.utility(&summary.mean_reward),
                slack: held_out_slack(&extended, &summary),
                lambda_norm: norm(&state.lambda),
                mu_norm: norm(&state.mu),
                sum_rate_sampled: summary.sum_rate_sampled,
                sum_rate_threshold: summary.sum_rate_threshold,
                mean_power: summary.mean_power,
            });
        }
    }
    Ok(TrainOutcome {
        params: primal.params,
        report,
        state,
    })
}
