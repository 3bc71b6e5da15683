use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial fuel-rate metamodel in speed and acceleration. There are no
/// default coefficients; they must come from calibration data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuelModel {
    /// `w0..w3` of the cruise term.
    pub cruise: [f64; 4],
    /// `r0..r2` of the acceleration term.
    pub accel: [f64; 3],
}

impl FuelModel {
    pub fn validate(&self) -> Result<()> {
        if self.cruise.iter().chain(&self.accel).all(|c| c.is_finite()) {
            Ok(())
        } else {
            Err(Error::config("fuel coefficients must be finite"))
        }
    }
}

/// Cruise polynomial plus the acceleration term, which is clamped at zero
/// while braking.
pub fn fuel_rate(v: f64, u: f64, coeffs: &FuelModel) -> f64 {
    let [w0, w1, w2, w3] = coeffs.cruise;
    let [r0, r1, r2] = coeffs.accel;
    let cruise = w0 + v * (w1 + v * (w2 + v * w3));
    let accel = (u * (r0 + v * (r1 + v * r2))).max(0.0);
    cruise + accel
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_constant_models() {
        let zero = FuelModel { cruise: [0.0; 4], accel: [0.0; 3] };
        assert_eq!(fuel_rate(12.0, 0.3, &zero), 0.0);
        let one = FuelModel { cruise: [1.0, 0.0, 0.0, 0.0], accel: [0.0; 3] };
        for v in [0.0, 5.0, 15.0] {
            assert_eq!(fuel_rate(v, -0.4, &one), 1.0);
        }
    }

    #[test]
    fn braking_recovers_nothing() {
        let m = FuelModel { cruise: [0.1, 0.0, 0.0, 0.0], accel: [1.0, 0.1, 0.01] };
        assert_eq!(fuel_rate(10.0, -0.5, &m), 0.1);
        assert!((fuel_rate(10.0, 0.5, &m) - (0.1 + 0.5 * 3.0)).abs() < 1e-12);
    }
}
