//! Random-edge graph neural networks (REGNNs) for power allocation in
//! interference-limited wireless networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: channel matrices as graph shift operators, polynomial graph
//!   filters, node permutations.
//! - [`model`]: the layered filter-bank network with exact reverse-mode
//!   gradients and a text checkpoint format.
//! - [`policy`]: the Bernoulli allocation policy and its score function.
//! - [`wireless`]: topologies, Rayleigh fading, Shannon rates, baselines.
//! - [`trainer`]: the model-free primal-dual learning loop.

pub mod adam;
pub mod consts;
pub mod error;
pub mod graph;
pub mod policy;
pub mod model;
pub mod rng;
pub mod trainer;
pub mod wireless;

pub use error::{Error, Result};
pub use graph::{apply_filter, permute, shift, ChannelMatrix, GraphSignal, Permutation};
pub use policy::{AllocationSpec, PolicySample};
pub use model::{backward, forward, num_params, Activation, FilterTensor, ForwardTape, RegnnConfig, TapInit};
pub use trainer::{train, DualState, TrainConfig, TrainOutcome, TrainReport};
pub use wireless::{NetworkModel, ProblemSpec, Variant};
