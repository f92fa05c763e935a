//! Numerical constants shared across modules.

/// Probability clamp applied before sampling and scoring the Bernoulli policy.
pub const PROB_CLAMP: f64 = 1e-6;

/// Path-loss exponent of the geometric channel model.
pub const PATHLOSS_EXPONENT: f64 = 2.2;

/// Scale of the Rayleigh fast-fading amplitude; `1/sqrt(2)` gives unit mean power.
pub const RAYLEIGH_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Half-width of the uniform tap initialization interval.
pub const TAP_INIT_RANGE: f64 = 0.1;

/// Largest network the exhaustive binary search accepts.
pub const BRUTE_FORCE_MAX_NODES: usize = 16;

/// Absolute tolerance for permutation-equivariance checks of the filter layer.
pub const FILTER_EQUIVARIANCE_TOL: f64 = 1e-12;

/// Absolute tolerance for permutation-equivariance checks of the full network.
pub const REGNN_EQUIVARIANCE_TOL: f64 = 1e-9;

/// Absolute tolerance for capacity permutation-equivariance.
pub const CAPACITY_EQUIVARIANCE_TOL: f64 = 1e-12;

/// Relative tolerance for backward-vs-finite-difference gradient checks.
pub const GRADIENT_REL_TOL: f64 = 1e-5;

/// Central finite-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Fading draws used for each held-out evaluation during training.
pub const EVAL_SAMPLES: usize = 256;

/// Significant digits used when writing floats to text artifacts.
pub const FLOAT_DIGITS: usize = 17;

/// Version tag written into checkpoints and topology files.
pub const FORMAT_VERSION: u32 = 1;
