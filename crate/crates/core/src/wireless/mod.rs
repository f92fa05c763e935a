//! The physical layer: topologies, fading, rewards and classical baselines.

mod baselines;
mod channel;
mod network;
mod problem;

pub use baselines::{
    brute_force_binary, equal_power, random_selection, wmmse, wmmse_with_trace, WmmseOutcome,
    WmmseSettings,
};
pub use channel::{capacity, sample_fading, sample_fading_with_scale, sum_rate, FadingSample};
pub use network::{generate_adhoc, generate_multicell, NetworkModel, TopologyKind};
pub use problem::{sample_demand, ProblemSpec, Variant};
