use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Approach, IntersectionConfig, Movement, VehicleRecord};

/// Stochastic arrival stream at the control-zone entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrivalModel {
    /// Rate of each Poisson process (vehicles/s).
    pub rate: f64,
    /// One process for the whole intersection when true, one per approach
    /// otherwise.
    pub pooled: bool,
    /// Entry speeds are uniform on this range.
    pub speed_range: (f64, f64),
    /// Relative weights of the twelve movements, indexed by
    /// `Movement::index`.
    pub movement_weights: [f64; 12],
    pub seed: u64,
    /// Arrivals are generated on `[0, horizon)`.
    pub horizon: f64,
    /// Stream truncated after this many vehicles.
    pub max_vehicles: Option<usize>,
    /// Arrivals on one entry lane closer than this (s) are delayed to it.
    /// Zero keeps the raw Poisson stream, whose entry gaps may already be
    /// below the safe distance.
    pub min_lane_headway: f64,
}

impl Default for ArrivalModel {
    fn default() -> Self {
        ArrivalModel {
            rate: 1.0,
            pooled: true,
            speed_range: (8.0, 12.0),
            movement_weights: [1.0; 12],
            seed: 1,
            horizon: 200.0,
            max_vehicles: None,
            min_lane_headway: 0.0,
        }
    }
}

impl ArrivalModel {
    pub fn validate(&self, cfg: &IntersectionConfig) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::config(format!("arrival rate must be positive, got {}", self.rate)));
        }
        let (lo, hi) = self.speed_range;
        if !(lo <= hi && lo > cfg.v_min && hi < cfg.v_max) {
            return Err(Error::config(format!(
                "speed range [{lo}, {hi}] must lie inside ({}, {})",
                cfg.v_min, cfg.v_max
            )));
        }
        if self.movement_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || self.movement_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::config("movement weights must be non-negative with a positive sum"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config("arrival horizon must be positive and finite"));
        }
        if !(self.min_lane_headway >= 0.0 && self.min_lane_headway.is_finite()) {
            return Err(Error::config("lane headway must be non-negative and finite"));
        }
        Ok(())
    }
}

fn speed(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.sample(Uniform::new(lo, hi).expect("validated range"))
    }
}

/// Seeded arrival stream sorted by entry time. Ties keep generation order.
pub fn generate_arrivals(model: &ArrivalModel, cfg: &IntersectionConfig) -> Result<Vec<VehicleRecord>> {
    model.validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let gap = Exp::new(model.rate).map_err(|e| Error::config(e.to_string()))?;
    let all = Movement::all();
    let cap = model.max_vehicles.unwrap_or(usize::MAX);
    let mut out: Vec<(f64, f64, Movement)> = Vec::new();

    if model.pooled {
        let pick = WeightedIndex::new(model.movement_weights).map_err(|e| Error::config(e.to_string()))?;
        let mut t = gap.sample(&mut rng);
        while t < model.horizon && out.len() < cap {
            let m = all[pick.sample(&mut rng)];
            out.push((t, speed(&mut rng, model.speed_range), m));
            t += gap.sample(&mut rng);
        }
    } else {
        for a in Approach::ALL {
            let ms: Vec<Movement> = all.iter().copied().filter(|m| m.origin == a).collect();
            let ws: Vec<f64> = ms.iter().map(|m| model.movement_weights[m.index()]).collect();
            if ws.iter().sum::<f64>() <= 0.0 {
                continue;
            }
            let pick = WeightedIndex::new(&ws).map_err(|e| Error::config(e.to_string()))?;
            let mut t = gap.sample(&mut rng);
            let mut n = 0;
            while t < model.horizon && n < cap {
                out.push((t, speed(&mut rng, model.speed_range), ms[pick.sample(&mut rng)]));
                n += 1;
                t += gap.sample(&mut rng);
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    if model.min_lane_headway > 0.0 {
        let mut last = [f64::NEG_INFINITY; 4];
        for (t, _, m) in out.iter_mut() {
            let k = m.origin as usize;
            *t = t.max(last[k] + model.min_lane_headway);
            last[k] = *t;
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out.truncate(cap);
    Ok(out
        .into_iter()
        .enumerate()
        .map(|(k, (t0, v0, movement))| VehicleRecord { id: k as u32 + 1, t0, v0, movement })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_is_reproducible() {
        let cfg = IntersectionConfig::default();
        let m = ArrivalModel { horizon: 20.0, ..Default::default() };
        assert_eq!(generate_arrivals(&m, &cfg).unwrap(), generate_arrivals(&m, &cfg).unwrap());
        let other = ArrivalModel { seed: 2, ..m.clone() };
        assert_ne!(generate_arrivals(&m, &cfg).unwrap(), generate_arrivals(&other, &cfg).unwrap());
    }

    #[test]
    fn inter_arrival_mean_and_speed_range() {
        let cfg = IntersectionConfig::default();
        let m = ArrivalModel { horizon: 1e9, max_vehicles: Some(10_000), ..Default::default() };
        let rs = generate_arrivals(&m, &cfg).unwrap();
        assert_eq!(rs.len(), 10_000);
        let mean = rs.last().unwrap().t0 / rs.len() as f64;
        // Standard error of the mean of 10⁴ unit exponentials is 0.01.
        assert!((mean - 1.0).abs() < 0.03, "mean inter-arrival {mean}");
        assert!(rs.iter().all(|r| (8.0..=12.0).contains(&r.v0)));
        assert!(rs.windows(2).all(|w| w[0].t0 <= w[1].t0));
    }

    #[test]
    fn per_approach_streams_merge_in_time_order() {
        let cfg = IntersectionConfig::default();
        let m = ArrivalModel { pooled: false, horizon: 50.0, ..Default::default() };
        let rs = generate_arrivals(&m, &cfg).unwrap();
        assert!(rs.windows(2).all(|w| w[0].t0 <= w[1].t0));
        assert!(Approach::ALL.iter().all(|a| rs.iter().any(|r| r.movement.origin == *a)));
        assert!(rs.iter().enumerate().all(|(k, r)| r.id == k as u32 + 1));
    }

    #[test]
    fn lane_headway_is_enforced() {
        let cfg = IntersectionConfig::default();
        let m = ArrivalModel { rate: 2.0, min_lane_headway: 1.5, horizon: 100.0, ..Default::default() };
        let rs = generate_arrivals(&m, &cfg).unwrap();
        for a in Approach::ALL {
            let ts: Vec<f64> = rs.iter().filter(|r| r.movement.origin == a).map(|r| r.t0).collect();
            assert!(ts.windows(2).all(|w| w[1] - w[0] >= 1.5 - 1e-12));
        }
        assert!(rs.windows(2).all(|w| w[0].t0 <= w[1].t0));
    }

    #[test]
    fn rejects_speed_range_outside_box() {
        let cfg = IntersectionConfig::default();
        let m = ArrivalModel { speed_range: (4.0, 12.0), ..Default::default() };
        assert!(matches!(generate_arrivals(&m, &cfg), Err(Error::Config(_))));
    }
}
