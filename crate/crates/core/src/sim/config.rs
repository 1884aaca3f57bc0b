use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactModel {
    /// Holonomic stance constraints with event-detected rigid impacts.
    RigidHybrid,
    /// Penalty ground forces on every contact point.
    Compliant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Rk4,
}

/// Ground height `height` for `x_min ≤ x < x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub height: f64,
}

/// Piecewise flat ground; later regions win where they overlap, zero elsewhere.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Terrain {
    pub regions: Vec<TerrainRegion>,
}

impl Terrain {
    pub fn flat() -> Self {
        Self::default()
    }

    /// A platform of `height` starting at `x_start` and extending forward.
    pub fn step_at(x_start: f64, height: f64) -> Self {
        Self {
            regions: vec![TerrainRegion {
                x_min: x_start,
                x_max: f64::INFINITY,
                height,
            }],
        }
    }

    pub fn height_at(&self, x: f64) -> f64 {
        self.regions
            .iter()
            .rev()
            .find(|r| x >= r.x_min && x < r.x_max)
            .map_or(0.0, |r| r.height)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub contact_model: ContactModel,
    /// Static full-weight penetration of the compliant ground (m).
    pub penetration_allowance: f64,
    /// Velocity damping of the compliant ground (s/m).
    pub contact_damping: f64,
    /// Slip speed at which regularized friction saturates (m/s).
    pub friction_velocity: f64,
    pub terrain: Terrain,
    pub integrator: Integrator,
    /// Absolute end time of a rollout (s).
    pub t_final: f64,
    /// Touchdown height tolerance (m).
    pub event_tolerance: f64,
    pub baumgarte_omega: f64,
    pub baumgarte_zeta: f64,
    /// Abort once any generalized velocity exceeds this magnitude.
    pub divergence_limit: f64,
    /// Abort once the hip drops below this height (m).
    pub min_base_height: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            contact_model: ContactModel::RigidHybrid,
            penetration_allowance: 1e-3,
            contact_damping: 50.0,
            friction_velocity: 0.05,
            terrain: Terrain::flat(),
            integrator: Integrator::Rk4,
            t_final: 1.0,
            event_tolerance: 1e-9,
            baumgarte_omega: 100.0,
            baumgarte_zeta: 1.0,
            divergence_limit: 1e3,
            min_base_height: 0.3,
        }
    }
}

impl SimConfig {
    pub fn compliant(penetration_allowance: f64) -> Self {
        Self {
            contact_model: ContactModel::Compliant,
            penetration_allowance,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSimConfig(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if self.contact_model == ContactModel::Compliant && !(self.penetration_allowance > 0.0) {
            return bad("penetration_allowance must be positive for compliant ground");
        }
        if !(self.event_tolerance > 0.0) {
            return bad("event_tolerance must be positive");
        }
        if self.contact_damping < 0.0 || !(self.friction_velocity > 0.0) {
            return bad("contact damping must be nonnegative and friction velocity positive");
        }
        if self.baumgarte_omega < 0.0 || self.baumgarte_zeta < 0.0 {
            return bad("Baumgarte gains must be nonnegative");
        }
        if !(self.divergence_limit > 0.0) {
            return bad("divergence_limit must be positive");
        }
        for r in &self.terrain.regions {
            if !(r.x_min < r.x_max) || !r.height.is_finite() {
                return bad("terrain regions need x_min < x_max and a finite height");
            }
        }
        Ok(())
    }
}
