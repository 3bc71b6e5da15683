//! Intersection geometry, movements, vehicle records and cost weights.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VehicleId = u32;

/// Approach arm of the four-way intersection, listed clockwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Approach {
    North,
    East,
    South,
    West,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::North, Approach::East, Approach::South, Approach::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Approach {
        Approach::ALL[i % 4]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Turn {
    Left,
    Straight,
    Right,
}

impl Turn {
    pub const ALL: [Turn; 3] = [Turn::Left, Turn::Straight, Turn::Right];
}

/// Origin arm plus turn direction. Right-hand traffic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Movement {
    pub origin: Approach,
    pub turn: Turn,
}

impl Movement {
    pub fn new(origin: Approach, turn: Turn) -> Self {
        Movement { origin, turn }
    }

    /// Arm through which the vehicle leaves the merging zone.
    pub fn exit(self) -> Approach {
        let k = match self.turn {
            Turn::Left => 1,
            Turn::Straight => 2,
            Turn::Right => 3,
        };
        Approach::from_index(self.origin.index() + k)
    }

    /// Dense index in `0..12`.
    pub fn index(self) -> usize {
        self.origin.index() * 3 + self.turn as usize
    }

    pub fn all() -> [Movement; 12] {
        let mut out = [Movement::new(Approach::North, Turn::Left); 12];
        for (i, m) in out.iter_mut().enumerate() {
            *m = Movement::new(Approach::from_index(i / 3), Turn::ALL[i % 3]);
        }
        out
    }
}

/// Per-turn merging-zone crossing times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnTimes {
    pub left: f64,
    pub straight: f64,
    pub right: f64,
}

impl TurnTimes {
    pub fn get(&self, turn: Turn) -> f64 {
        match turn {
            Turn::Left => self.left,
            Turn::Straight => self.straight,
            Turn::Right => self.right,
        }
    }
}

/// Static geometry and box limits of the intersection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntersectionConfig {
    /// Control-zone length `L` (m).
    pub cz_length: f64,
    /// Merging-zone side `S` (m).
    pub mz_side: f64,
    /// Path length through the merging zone for a left turn (m).
    pub left_path: f64,
    /// Path length through the merging zone for a right turn (m).
    pub right_path: f64,
    /// Turn radii used by the turn-time formula (m).
    pub left_radius: f64,
    pub right_radius: f64,
    /// Minimum rear-end gap `δ` (m).
    pub safe_distance: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Super-elevation in percent.
    pub super_elevation: f64,
    /// Side-friction factor.
    pub side_friction: f64,
    /// Speed at which every vehicle leaves the merging zone.
    pub exit_speed: f64,
    /// Explicit crossing times. When absent, turns use the radius formula and
    /// straight crossings take `mz_side / exit_speed`.
    pub turn_times: Option<TurnTimes>,
}

impl Default for IntersectionConfig {
    fn default() -> Self {
        let s = 30.0;
        IntersectionConfig {
            cz_length: 400.0,
            mz_side: s,
            left_path: 3.0 / 8.0 * PI * s,
            right_path: PI * s / 8.0,
            left_radius: 0.75 * s,
            right_radius: 0.25 * s,
            safe_distance: 10.0,
            v_min: 5.0,
            v_max: 15.0,
            u_min: -0.5,
            u_max: 0.5,
            super_elevation: 0.0,
            side_friction: 0.3,
            exit_speed: 10.0,
            turn_times: Some(TurnTimes { left: 5.0, straight: 3.0, right: 3.0 }),
        }
    }
}

impl IntersectionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cz_length", self.cz_length),
            ("mz_side", self.mz_side),
            ("left_path", self.left_path),
            ("right_path", self.right_path),
            ("left_radius", self.left_radius),
            ("right_radius", self.right_radius),
            ("safe_distance", self.safe_distance),
            ("u_max", self.u_max),
            ("exit_speed", self.exit_speed),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.v_min > 0.0 && self.v_min < self.v_max && self.v_max.is_finite()) {
            return Err(Error::config(format!(
                "speed box requires 0 < v_min < v_max, got [{}, {}]",
                self.v_min, self.v_max
            )));
        }
        if !(self.u_min < 0.0 && self.u_min.is_finite()) {
            return Err(Error::config(format!("u_min must be negative, got {}", self.u_min)));
        }
        if !(self.side_friction + 0.01 * self.super_elevation > 0.0) {
            return Err(Error::config("0.01 * super_elevation + side_friction must be positive"));
        }
        if let Some(tt) = &self.turn_times {
            for v in [tt.left, tt.straight, tt.right] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::config(format!("turn times must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// `max(u_max, |u_min|)`.
    pub fn u_bar(&self) -> f64 {
        self.u_max.max(self.u_min.abs())
    }

    /// Path length inside the merging zone.
    pub fn path_length(&self, turn: Turn) -> f64 {
        match turn {
            Turn::Left => self.left_path,
            Turn::Straight => self.mz_side,
            Turn::Right => self.right_path,
        }
    }

    fn curve_speed(&self, radius: f64) -> f64 {
        (15.0 * radius * (0.01 * self.super_elevation + self.side_friction)).sqrt()
    }

    /// Time spent inside the merging zone.
    pub fn turn_time(&self, turn: Turn) -> f64 {
        if let Some(tt) = &self.turn_times {
            return tt.get(turn);
        }
        match turn {
            Turn::Left => self.left_radius / self.curve_speed(self.left_radius),
            Turn::Right => self.right_radius / self.curve_speed(self.right_radius),
            Turn::Straight => self.mz_side / self.exit_speed,
        }
    }

    /// Time for a vehicle to cover `safe_distance` at its merging-zone speed.
    /// Straight crossings use the vehicle's own entry speed.
    pub fn gap_time(&self, turn: Turn, entry_speed: f64) -> f64 {
        match turn {
            Turn::Left => self.safe_distance / self.curve_speed(self.left_radius),
            Turn::Right => self.safe_distance / self.curve_speed(self.right_radius),
            Turn::Straight => self.safe_distance / entry_speed.max(f64::MIN_POSITIVE),
        }
    }
}

/// Immutable arrival record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub id: VehicleId,
    pub t0: f64,
    pub v0: f64,
    pub movement: Movement,
}

impl VehicleRecord {
    pub fn validate(&self, cfg: &IntersectionConfig) -> Result<()> {
        if !(self.t0.is_finite() && self.t0 >= 0.0) {
            return Err(Error::input(format!("vehicle {}: entry time must be >= 0", self.id)));
        }
        if !(self.v0 > cfg.v_min && self.v0 < cfg.v_max) {
            return Err(Error::input(format!(
                "vehicle {}: entry speed {} outside ({}, {})",
                self.id, self.v0, cfg.v_min, cfg.v_max
            )));
        }
        Ok(())
    }
}

/// Scalarization weights for the two stages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    /// Control-zone trade-off between travel time and energy, in `[0, 1)`.
    pub beta: f64,
    /// Merging-zone trade-off between acceleration and jerk, in `(0, 1)`.
    pub w: f64,
    /// Jerk normalization.
    pub jerk_scale: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights { beta: 0.5, w: 0.5, jerk_scale: 10.0 }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::config(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        if !(self.w > 0.0 && self.w < 1.0) {
            return Err(Error::config(format!("w must lie in (0, 1), got {}", self.w)));
        }
        if !(self.jerk_scale > 0.0 && self.jerk_scale.is_finite()) {
            return Err(Error::config("jerk_scale must be positive"));
        }
        Ok(())
    }

    /// Travel-time weight after dividing the control-zone cost by `2 γ2`.
    pub fn gamma(&self, cfg: &IntersectionConfig) -> Result<f64> {
        self.validate()?;
        let ub = cfg.u_bar();
        let g1 = self.beta;
        let g2 = (1.0 - self.beta) / (ub * ub);
        Ok(g1 / (2.0 * g2))
    }

    /// `(ρ1, ρ2)` weighting `u²` and `J²` in the merging zone.
    pub fn rho(&self, cfg: &IntersectionConfig) -> Result<(f64, f64)> {
        self.validate()?;
        let ub = cfg.u_bar();
        let q1 = 1.0 / (ub * ub);
        let q2 = 1.0 / (self.jerk_scale * self.jerk_scale);
        Ok((self.w * q1, (1.0 - self.w) * q2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exits_follow_right_hand_geometry() {
        let w = Approach::West;
        assert_eq!(Movement::new(w, Turn::Straight).exit(), Approach::East);
        assert_eq!(Movement::new(w, Turn::Left).exit(), Approach::North);
        assert_eq!(Movement::new(w, Turn::Right).exit(), Approach::South);
        assert_eq!(Movement::new(Approach::South, Turn::Left).exit(), Approach::West);
    }

    #[test]
    fn movement_index_is_dense() {
        let all = Movement::all();
        for (i, m) in all.iter().enumerate() {
            assert_eq!(m.index(), i);
        }
    }

    #[test]
    fn gamma_at_half_beta() {
        let g = CostWeights::default().gamma(&IntersectionConfig::default()).unwrap();
        assert!((g - 0.125).abs() < 1e-15);
    }

    #[test]
    fn beta_one_rejected() {
        let w = CostWeights { beta: 1.0, ..Default::default() };
        assert!(matches!(w.gamma(&IntersectionConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn rho_defaults_give_stiff_exponent() {
        let (r1, r2) = CostWeights::default().rho(&IntersectionConfig::default()).unwrap();
        assert!(((r1 / r2).sqrt() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn default_paths_are_quarter_circles() {
        let c = IntersectionConfig::default();
        assert!((c.left_path - 0.5 * PI * c.left_radius).abs() < 1e-12);
        assert!((c.right_path - 0.5 * PI * c.right_radius).abs() < 1e-12);
        assert!((c.left_path - 35.343).abs() < 1e-3);
        assert!((c.right_path - 11.781).abs() < 1e-3);
    }

    #[test]
    fn turn_time_overrides_win() {
        let mut c = IntersectionConfig::default();
        assert_eq!(c.turn_time(Turn::Left), 5.0);
        c.turn_times = None;
        let r = c.left_radius;
        let expect = r / (15.0 * r * 0.3f64).sqrt();
        assert!((c.turn_time(Turn::Left) - expect).abs() < 1e-12);
        assert!((c.turn_time(Turn::Straight) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn inverted_speed_box_rejected() {
        let c = IntersectionConfig { v_min: 16.0, ..Default::default() };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
