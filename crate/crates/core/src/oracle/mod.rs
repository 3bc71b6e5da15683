//! Brute-force discretized references for both solvers.
//!
//! Both oracles optimize over piecewise-constant inputs with exact
//! integration, so every trajectory they return is feasible in continuous
//! time and its cost bounds the analytic optimum from above.

mod cz;
mod mz;

pub use cz::{brute_force_cz, CzOracle};
pub use mz::{brute_force_mz, MzOracle};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    /// Nominal step (s); the step actually used divides the horizon evenly.
    pub h: f64,
    /// Absolute terminal-time bounds searched in free mode. `None` uses the
    /// problem window intersected with the kinematic reach.
    pub horizon: Option<(f64, f64)>,
}

impl GridSpec {
    pub fn new(h: f64) -> Self {
        GridSpec { h, horizon: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::input("grid step must be positive"));
        }
        if let Some((lo, hi)) = self.horizon {
            if !(lo <= hi) {
                return Err(Error::input("horizon bounds out of order"));
            }
        }
        Ok(())
    }
}

/// Node samples of a discrete trajectory. `u` and `jerk` hold one value per
/// interval, the other fields one value per node.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiscreteTrajectory {
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub jerk: Vec<f64>,
}
