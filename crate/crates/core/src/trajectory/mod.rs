//! Reference trajectories with a hybrid mode schedule.
//!
//! Each output is a piecewise polynomial. Positions are continuous everywhere;
//! velocities may jump only at the listed nominal impact times, where
//! [`Side`] selects the one-sided limit. Cyclic gaits wrap with a period and a
//! per-period additive offset (forward progress of the base).

mod gait;
mod io;
mod poly;

pub use gait::{generate_walking_gait, GaitParams};
pub use poly::{hermite_segment, PiecewisePolynomial, Sample, Side};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impact::apply_reset_map;
use crate::model::{coordinate_index, ContactSet, RobotModel, RobotState, COORDINATE_NAMES, NUM_COORDINATES};

const POSITION_TOL: f64 = 1e-9;
const VELOCITY_TOL: f64 = 1e-7;
const TIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub name: String,
    pub start: f64,
    pub end: f64,
    pub contacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputTrajectory {
    pub name: String,
    pub poly: PiecewisePolynomial,
    /// Added once per elapsed period when wrapping.
    pub period_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    outputs: Vec<OutputTrajectory>,
    modes: Vec<Mode>,
    impact_times: Vec<f64>,
    period: Option<f64>,
    mirror: Vec<(String, String)>,
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIME_TOL * (1.0 + a.abs().max(b.abs()))
}

impl ReferenceTrajectory {
    pub fn new(
        outputs: Vec<OutputTrajectory>,
        modes: Vec<Mode>,
        impact_times: Vec<f64>,
        period: Option<f64>,
        mirror: Vec<(String, String)>,
    ) -> Result<Self> {
        let traj = Self {
            outputs,
            modes,
            impact_times,
            period,
            mirror,
        };
        traj.validate()?;
        Ok(traj)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTrajectory(m));
        if self.modes.is_empty() {
            return bad("empty mode schedule".into());
        }
        if self.outputs.is_empty() {
            return bad("no outputs".into());
        }
        for w in self.modes.windows(2) {
            if !near(w[0].end, w[1].start) {
                return bad(format!("modes {} and {} are not contiguous", w[0].name, w[1].name));
            }
        }
        if self.modes.iter().any(|m| !(m.end > m.start)) {
            return bad("mode with empty interval".into());
        }
        let (t0, t1) = (self.start(), self.end());
        if let Some(p) = self.period {
            if !near(p, t1 - t0) {
                return bad(format!("period {p} differs from the schedule length {}", t1 - t0));
            }
        }
        if self.impact_times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("impact times must be strictly increasing".into());
        }
        if self.impact_times.iter().any(|&t| t <= t0 || t > t1 + TIME_TOL) {
            return bad(format!("impact times must lie in ({t0}, {t1}]"));
        }
        for (i, o) in self.outputs.iter().enumerate() {
            if self.outputs[..i].iter().any(|p| p.name == o.name) {
                return bad(format!("duplicate output {}", o.name));
            }
            if !near(o.poly.start(), t0) || !near(o.poly.end(), t1) {
                return bad(format!("output {} does not span [{t0}, {t1}]", o.name));
            }
            let bps = o.poly.breakpoints();
            for k in 1..bps.len() - 1 {
                let (a, b) = (o.poly.eval_segment(k - 1, bps[k]), o.poly.eval_segment(k, bps[k]));
                self.check_joint(&o.name, bps[k], a, b)?;
            }
            if self.period.is_some() {
                let a = o.poly.eval_segment(o.poly.num_segments() - 1, t1);
                let mut b = o.poly.eval_segment(0, t0);
                b[0] += o.period_offset;
                self.check_joint(&o.name, t1, a, b)?;
            }
        }
        for (a, b) in &self.mirror {
            if self.output_index(a).is_none() || self.output_index(b).is_none() {
                return bad(format!("mirror pair ({a}, {b}) names an unknown output"));
            }
        }
        Ok(())
    }

    fn check_joint(&self, name: &str, t: f64, pre: Sample, post: Sample) -> Result<()> {
        if (pre[0] - post[0]).abs() > POSITION_TOL * (1.0 + pre[0].abs()) {
            return Err(Error::InvalidTrajectory(format!(
                "output {name} is discontinuous in position at t = {t}"
            )));
        }
        let at_impact = self.impact_times.iter().any(|&ti| near(ti, t));
        if !at_impact && (pre[1] - post[1]).abs() > VELOCITY_TOL * (1.0 + pre[1].abs()) {
            return Err(Error::InvalidTrajectory(format!(
                "output {name} has a velocity jump at t = {t}, which is not an impact time"
            )));
        }
        Ok(())
    }

    pub fn outputs(&self) -> &[OutputTrajectory] {
        &self.outputs
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.outputs.iter().map(|o| o.name.as_str()).collect()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn impact_times(&self) -> &[f64] {
        &self.impact_times
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn mirror_pairs(&self) -> &[(String, String)] {
        &self.mirror
    }

    pub fn start(&self) -> f64 {
        self.modes[0].start
    }

    pub fn end(&self) -> f64 {
        self.modes[self.modes.len() - 1].end
    }

    fn output_index(&self, name: &str) -> Option<usize> {
        self.outputs.iter().position(|o| o.name == name)
    }

    /// Maps absolute time to `(local time, elapsed periods)`. At exact period
    /// boundaries `Pre` stays in the earlier period.
    pub fn wrap(&self, t: f64, side: Side) -> Result<(f64, i64)> {
        let (t0, t1) = (self.start(), self.end());
        match self.period {
            None => {
                if t < t0 - TIME_TOL || t > t1 + TIME_TOL {
                    return Err(Error::OutOfRange { t, start: t0, end: t1 });
                }
                Ok((t.clamp(t0, t1), 0))
            }
            Some(p) => {
                let mut k = ((t - t0) / p).floor();
                let mut local = t - k * p;
                if near(local, t1) {
                    local = t1;
                }
                if near(local, t0) {
                    local = t0;
                }
                if local >= t1 {
                    k += 1.0;
                    local = t0;
                }
                if let Some(&ti) = self.impact_times.iter().find(|&&ti| near(local, ti)) {
                    local = ti;
                }
                if side == Side::Pre && local == t0 {
                    k -= 1.0;
                    local = t1;
                }
                Ok((local, k as i64))
            }
        }
    }

    pub fn eval(&self, output: &str, t: f64, side: Side) -> Result<Sample> {
        let i = self
            .output_index(output)
            .ok_or_else(|| Error::UnknownOutput(output.to_string()))?;
        self.eval_index(i, t, side)
    }

    fn eval_index(&self, i: usize, t: f64, side: Side) -> Result<Sample> {
        let (local, k) = self.wrap(t, side)?;
        let o = &self.outputs[i];
        let mut s = o.poly.eval(local, side);
        s[0] += k as f64 * o.period_offset;
        Ok(s)
    }

    /// Desired `(q, v, v̇)` when the outputs are the generalized coordinates.
    pub fn eval_coordinates(&self, t: f64, side: Side) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let mut q = DVector::zeros(NUM_COORDINATES);
        let mut v = DVector::zeros(NUM_COORDINATES);
        let mut a = DVector::zeros(NUM_COORDINATES);
        for (c, name) in COORDINATE_NAMES.iter().enumerate() {
            let s = self.eval(name, t, side)?;
            q[c] = s[0];
            v[c] = s[1];
            a[c] = s[2];
        }
        Ok((q, v, a))
    }

    pub fn has_coordinates(&self) -> bool {
        COORDINATE_NAMES.iter().all(|n| self.output_index(n).is_some())
    }

    /// Mode active at `t`; at a boundary `Pre` returns the ending mode.
    pub fn mode_at(&self, t: f64, side: Side) -> Result<&Mode> {
        let (local, _) = self.wrap(t, side)?;
        let idx = match side {
            Side::Post => self.modes.iter().rposition(|m| local >= m.start),
            Side::Pre => self.modes.iter().position(|m| local <= m.end),
        };
        Ok(&self.modes[idx.unwrap_or(0)])
    }

    /// All impact times (absolute, with periodic repetition) in `[t0, t1]`.
    pub fn impacts_between(&self, t0: f64, t1: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self.period {
            None => out.extend(self.impact_times.iter().copied().filter(|&t| t >= t0 && t <= t1)),
            Some(p) => {
                let k0 = ((t0 - self.end()) / p).floor() as i64;
                let k1 = ((t1 - self.start()) / p).ceil() as i64;
                for k in k0..=k1 {
                    for &ti in &self.impact_times {
                        let t = ti + k as f64 * p;
                        if t >= t0 && t <= t1 {
                            out.push(t);
                        }
                    }
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| near(*a, *b));
        out
    }

    /// Nominal impact time closest to `t`.
    pub fn nearest_impact(&self, t: f64) -> Option<f64> {
        let span = self.period.unwrap_or(self.end() - self.start());
        self.impacts_between(t - span, t + span)
            .into_iter()
            .min_by(|a, b| (a - t).abs().total_cmp(&(b - t).abs()))
    }

    /// Contacts gained at the impact at `t`.
    pub fn impacting_contacts(&self, t: f64) -> Result<Vec<String>> {
        let before = self.mode_at(t, Side::Pre)?;
        let after = self.mode_at(t, Side::Post)?;
        Ok(after
            .contacts
            .iter()
            .filter(|c| !before.contacts.contains(c))
            .cloned()
            .collect())
    }

    /// Applies the mirror map to a coordinate vector.
    pub fn mirror_coordinates(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = x.clone();
        for (a, b) in &self.mirror {
            if let (Some(i), Some(j)) = (coordinate_index(a), coordinate_index(b)) {
                out[i] = x[j];
                out[j] = x[i];
            }
        }
        out
    }

    /// Largest `‖v_des(t⁺) − reset(v_des(t⁻))‖∞` over the impact times of one
    /// period, resetting with the contacts gained at each impact.
    pub fn reset_consistency_error(&self, model: &RobotModel) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for &ti in &self.impact_times {
            let (q, v_pre, _) = self.eval_coordinates(ti, Side::Pre)?;
            let (_, v_post, _) = self.eval_coordinates(ti, Side::Post)?;
            let contacts = ContactSet::from_names(model, &self.impacting_contacts(ti)?)?;
            let state = RobotState::new(q, v_pre, ti)?;
            let reset = apply_reset_map(model, &state, &contacts)?;
            worst = worst.max((reset.post_velocity - v_post).amax());
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_mode(jump: f64, impact: bool) -> Result<ReferenceTrajectory> {
        // y = t on [0, 1], then slope (1 + jump) on [1, 2]
        let poly = PiecewisePolynomial::new(vec![0.0, 1.0, 2.0], vec![vec![0.0, 1.0], vec![1.0, 1.0 + jump]])?;
        let modes = vec![
            Mode {
                name: "a".into(),
                start: 0.0,
                end: 1.0,
                contacts: vec!["left_foot".into()],
            },
            Mode {
                name: "b".into(),
                start: 1.0,
                end: 2.0,
                contacts: vec!["right_foot".into()],
            },
        ];
        ReferenceTrajectory::new(
            vec![OutputTrajectory {
                name: "y".into(),
                poly,
                period_offset: 0.0,
            }],
            modes,
            if impact { vec![1.0] } else { vec![] },
            None,
            vec![],
        )
    }

    #[test]
    fn jump_only_at_impact_times() {
        assert!(two_mode(0.5, true).is_ok());
        assert!(two_mode(0.5, false).is_err());
        assert!(two_mode(0.0, false).is_ok());
    }

    #[test]
    fn one_sided_evaluation() {
        let r = two_mode(-2.0, true).unwrap();
        let pre = r.eval("y", 1.0, Side::Pre).unwrap();
        let post = r.eval("y", 1.0, Side::Post).unwrap();
        assert_eq!(pre[0], post[0]);
        assert_eq!(post[1] - pre[1], -2.0);
        assert_eq!(r.mode_at(1.0, Side::Pre).unwrap().name, "a");
        assert_eq!(r.mode_at(1.0, Side::Post).unwrap().name, "b");
        assert_eq!(r.impacting_contacts(1.0).unwrap(), vec!["right_foot".to_string()]);
    }

    #[test]
    fn out_of_range_and_unknown_output() {
        let r = two_mode(0.0, false).unwrap();
        assert!(matches!(r.eval("y", 3.0, Side::Post), Err(Error::OutOfRange { .. })));
        assert!(matches!(r.eval("z", 0.5, Side::Post), Err(Error::UnknownOutput(_))));
    }

    #[test]
    fn empty_schedule_rejected() {
        let poly = PiecewisePolynomial::constant(0.0, 0.0, 1.0).unwrap();
        let out = vec![OutputTrajectory {
            name: "y".into(),
            poly,
            period_offset: 0.0,
        }];
        assert!(ReferenceTrajectory::new(out, vec![], vec![], None, vec![]).is_err());
    }

    #[test]
    fn periodic_wrap_adds_offset() {
        let poly = PiecewisePolynomial::new(vec![0.0, 1.0], vec![vec![0.0, 0.3]]).unwrap();
        let r = ReferenceTrajectory::new(
            vec![OutputTrajectory {
                name: "x".into(),
                poly,
                period_offset: 0.3,
            }],
            vec![Mode {
                name: "m".into(),
                start: 0.0,
                end: 1.0,
                contacts: vec![],
            }],
            vec![],
            Some(1.0),
            vec![],
        )
        .unwrap();
        let a = r.eval("x", 0.25, Side::Post).unwrap();
        let b = r.eval("x", 2.25, Side::Post).unwrap();
        assert!((b[0] - a[0] - 0.6).abs() < 1e-12);
        assert_eq!(r.wrap(1.0, Side::Pre).unwrap(), (1.0, 0));
        assert_eq!(r.wrap(1.0, Side::Post).unwrap(), (0.0, 1));
        assert_eq!(r.wrap(-0.5, Side::Post).unwrap().1, -1);
    }

    #[test]
    fn impacts_repeat_with_period() {
        let poly = PiecewisePolynomial::constant(0.0, 0.0, 1.0).unwrap();
        let r = ReferenceTrajectory::new(
            vec![OutputTrajectory {
                name: "x".into(),
                poly,
                period_offset: 0.0,
            }],
            vec![Mode {
                name: "m".into(),
                start: 0.0,
                end: 1.0,
                contacts: vec![],
            }],
            vec![0.5, 1.0],
            Some(1.0),
            vec![],
        )
        .unwrap();
        assert_eq!(r.impacts_between(0.2, 2.2), vec![0.5, 1.0, 1.5, 2.0]);
        assert_eq!(r.nearest_impact(1.6), Some(1.5));
    }
}
