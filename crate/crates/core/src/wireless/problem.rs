use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::AllocationSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Maximise sum-rate under an average total-power budget.
    SumRateBudget,
    /// Maximise sum-rate while each node's average rate covers its mean demand.
    DemandConstrained,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub sigma2: f64,
    pub p_max: f64,
    pub alloc: AllocationSpec,
    pub variant: Variant,
    pub demand_mean: f64,
}

impl ProblemSpec {
    /// Sum-rate problem with `σ² = 1`, `p0 = 1` and a budget of half the nodes.
    pub fn sum_rate_default(m: usize) -> Self {
        Self {
            sigma2: 1.0,
            p_max: m as f64 / 2.0,
            alloc: AllocationSpec { p0: 1.0 },
            variant: Variant::SumRateBudget,
            demand_mean: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::InvalidProblem(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::InvalidProblem(format!("p_max must be positive, got {}", self.p_max)));
        }
        AllocationSpec::new(self.alloc.p0)?;
        if self.variant == Variant::DemandConstrained && (self.demand_mean.is_nan() || self.demand_mean <= 0.0) {
            return Err(Error::InvalidProblem(format!(
                "demand_mean must be positive, got {}",
                self.demand_mean
            )));
        }
        Ok(())
    }
}

/// i.i.d. exponential node demands with the given mean.
pub fn sample_demand<R: Rng + ?Sized>(m: usize, mean: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::InvalidProblem(format!("demand mean must be positive, got {mean}")));
    }
    let dist = Exp::new(1.0 / mean).map_err(|e| Error::InvalidProblem(e.to_string()))?;
    Ok((0..m).map(|_| dist.sample(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn demand_is_nonnegative_and_reproducible() {
        let a = sample_demand(100, 0.05, &mut stream(1, Stream::Demand)).unwrap();
        let b = sample_demand(100, 0.05, &mut stream(1, Stream::Demand)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|x| *x >= 0.0));
        assert!(sample_demand(3, 0.0, &mut stream(1, Stream::Demand)).is_err());
    }

    #[test]
    fn problem_validation() {
        assert!(ProblemSpec::sum_rate_default(4).validate().is_ok());
        let mut p = ProblemSpec::sum_rate_default(4);
        p.sigma2 = 0.0;
        assert!(p.validate().is_err());
    }
}
