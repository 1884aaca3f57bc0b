//! Kinematic two-mode walking gait.
//!
//! The left-stance step is designed from three configurations (double-support
//! start, mid-swing, touchdown) solved by two-link inverse kinematics, joined
//! by clamped cubic splines on pitch and joints. The base follows from the
//! pinned stance foot and is stored as a fine Hermite interpolant. Start
//! velocities are the mirrored reset of the touchdown velocities, so the
//! reference satisfies the impact map exactly; the right-stance step is the
//! mirror image shifted by one step.

use nalgebra::{DVector, Matrix2, Vector2};

use super::{Mode, OutputTrajectory, PiecewisePolynomial, ReferenceTrajectory};
use crate::dynamics::{contact_point_jacobian, contact_point_position};
use crate::error::{Error, Result};
use crate::impact::apply_reset_map;
use crate::model::{
    ContactSet, RobotModel, RobotState, BASE_X, BASE_Z, COORDINATE_NAMES, LEFT_HIP, LEFT_KNEE, LEFT_THIGH,
    NUM_COORDINATES, PITCH, RIGHT_HIP, RIGHT_KNEE,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitParams {
    /// Forward travel per period (two steps), m.
    pub step_length: f64,
    /// Duration of two steps, s.
    pub period: f64,
    /// Swing-foot height at mid-swing, m.
    pub clearance: f64,
    pub hip_height: f64,
    pub torso_pitch: f64,
    /// Swing-foot descent speed at touchdown relative to the hip's forward speed.
    pub landing_slope: f64,
    /// Hermite sub-intervals per step for the base.
    pub base_knots: usize,
}

impl Default for GaitParams {
    fn default() -> Self {
        Self {
            step_length: 0.3,
            period: 0.7,
            clearance: 0.08,
            hip_height: 0.77,
            torso_pitch: 0.0,
            landing_slope: 1.0,
            base_knots: 16,
        }
    }
}

pub fn generate_walking_gait(model: &RobotModel, step_length: f64, period: f64, clearance: f64) -> Result<ReferenceTrajectory> {
    GaitParams {
        step_length,
        period,
        clearance,
        ..GaitParams::default()
    }
    .generate(model)
}

struct Leg {
    thigh: f64,
    shank: f64,
}

impl Leg {
    fn dir_prime(phi: f64) -> Vector2<f64> {
        Vector2::new(phi.cos(), phi.sin())
    }

    /// Absolute thigh angle and relative knee angle placing the foot at `rel`
    /// from the hip, knee bent forward.
    fn ik(&self, rel: Vector2<f64>, what: &str) -> Result<(f64, f64)> {
        let (l1, l2) = (self.thigh, self.shank);
        let r = rel.norm();
        if r >= l1 + l2 || r <= (l1 - l2).abs() {
            return Err(Error::Unreachable(format!(
                "{what}: foot {r:.4} m from the hip, leg reach is ({:.4}, {:.4}) m",
                (l1 - l2).abs(),
                l1 + l2
            )));
        }
        let knee = -((r * r - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0).acos();
        let beta = rel.x.atan2(-rel.y);
        let delta = (l2 * knee.sin()).atan2(l1 + l2 * knee.cos());
        Ok((beta - delta, knee))
    }

    /// Absolute thigh and shank rates producing foot velocity `rel_dot` relative to the hip.
    fn ik_rate(&self, phi1: f64, phi2: f64, rel_dot: Vector2<f64>) -> Result<(f64, f64)> {
        let a = Self::dir_prime(phi1) * self.thigh;
        let b = Self::dir_prime(phi2) * self.shank;
        let m = Matrix2::new(a.x, b.x, a.y, b.y);
        let sol = m
            .lu()
            .solve(&rel_dot)
            .ok_or_else(|| Error::Unreachable("leg is singular (fully stretched)".into()))?;
        Ok((sol.x, sol.y))
    }
}

struct Knot {
    q: DVector<f64>,
}

impl GaitParams {
    fn validate(&self) -> Result<()> {
        let ok = self.step_length.is_finite()
            && self.step_length >= 0.0
            && self.period.is_finite()
            && self.period > 0.0
            && self.clearance.is_finite()
            && self.clearance >= 0.0
            && self.hip_height > 0.0
            && self.landing_slope >= 0.0
            && self.base_knots >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidTrajectory(format!("invalid gait parameters {self:?}")))
        }
    }

    pub fn generate(&self, model: &RobotModel) -> Result<ReferenceTrajectory> {
        self.validate()?;
        let left = model.contact_id("left_foot")?;
        let right = model.contact_id("right_foot")?;
        let leg = Leg {
            thigh: model.links()[LEFT_THIGH].length,
            shank: model.contact(left)?.offset,
        };
        let s = 0.5 * self.step_length;
        let ts = 0.5 * self.period;
        let h = self.hip_height;
        let p0 = self.torso_pitch;
        let hip_speed = s / ts;

        // left foot pinned at x = s/2; hip moves from 0 to s
        let stance_foot = Vector2::new(0.5 * s, 0.0);
        let knot = |hip_x: f64, swing: Vector2<f64>, what: &str| -> Result<Knot> {
            let hip = Vector2::new(hip_x, h);
            let (l1, lk) = leg.ik(stance_foot - hip, &format!("{what} stance leg"))?;
            let (r1, rk) = leg.ik(swing - hip, &format!("{what} swing leg"))?;
            let mut q = DVector::zeros(NUM_COORDINATES);
            q[BASE_X] = hip_x;
            q[BASE_Z] = h;
            q[PITCH] = p0;
            q[LEFT_HIP] = l1 - p0;
            q[LEFT_KNEE] = lk;
            q[RIGHT_HIP] = r1 - p0;
            q[RIGHT_KNEE] = rk;
            Ok(Knot { q })
        };
        let start = knot(0.0, Vector2::new(-0.5 * s, 0.0), "start")?;
        let mid = knot(0.5 * s, Vector2::new(0.5 * s, self.clearance), "mid-swing")?;
        let end = knot(s, Vector2::new(1.5 * s, 0.0), "touchdown")?;

        // touchdown velocity: hip forward, stance foot still, swing foot descending
        let mut v_end = DVector::zeros(NUM_COORDINATES);
        v_end[BASE_X] = hip_speed;
        let qe = &end.q;
        let stance_rates = leg.ik_rate(
            p0 + qe[LEFT_HIP],
            p0 + qe[LEFT_HIP] + qe[LEFT_KNEE],
            Vector2::new(-hip_speed, 0.0),
        )?;
        let swing_rates = leg.ik_rate(
            p0 + qe[RIGHT_HIP],
            p0 + qe[RIGHT_HIP] + qe[RIGHT_KNEE],
            Vector2::new(-hip_speed, -self.landing_slope * hip_speed),
        )?;
        v_end[LEFT_HIP] = stance_rates.0;
        v_end[LEFT_KNEE] = stance_rates.1 - stance_rates.0;
        v_end[RIGHT_HIP] = swing_rates.0;
        v_end[RIGHT_KNEE] = swing_rates.1 - swing_rates.0;

        let reset = apply_reset_map(model, &RobotState::new(qe.clone(), v_end.clone(), ts)?, &ContactSet::single(right))?;
        let v_start = mirror(&reset.post_velocity);

        // angle splines for the left-stance step
        let times = [0.0, 0.5 * ts, ts];
        let mut step: Vec<PiecewisePolynomial> = Vec::with_capacity(NUM_COORDINATES);
        for c in 0..NUM_COORDINATES {
            if c == BASE_X || c == BASE_Z {
                step.push(PiecewisePolynomial::constant(0.0, 0.0, ts)?);
                continue;
            }
            let vals = [start.q[c], mid.q[c], end.q[c]];
            step.push(PiecewisePolynomial::clamped_cubic(&times, &vals, v_start[c], v_end[c])?);
        }

        // base from the pinned stance foot
        let n = self.base_knots;
        let mut bt = Vec::with_capacity(n + 1);
        let mut bx = Vec::with_capacity(n + 1);
        let mut bz = Vec::with_capacity(n + 1);
        let mut vx = Vec::with_capacity(n + 1);
        let mut vz = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let t = ts * k as f64 / n as f64;
            let mut q = DVector::zeros(NUM_COORDINATES);
            let mut v = DVector::zeros(NUM_COORDINATES);
            for c in [PITCH, LEFT_HIP, LEFT_KNEE, RIGHT_HIP, RIGHT_KNEE] {
                let smp = step[c].eval(t, super::Side::Post);
                q[c] = smp[0];
                v[c] = smp[1];
            }
            let rel = contact_point_position(model, &q, left)?;
            let foot_vel = contact_point_jacobian(model, &q, left)? * &v;
            bt.push(t);
            bx.push(stance_foot.x - rel.x);
            bz.push(stance_foot.y - rel.y);
            vx.push(-foot_vel[0]);
            vz.push(-foot_vel[1]);
        }
        vx[0] = v_start[BASE_X];
        vz[0] = v_start[BASE_Z];
        vx[n] = v_end[BASE_X];
        vz[n] = v_end[BASE_Z];
        step[BASE_X] = PiecewisePolynomial::hermite(&bt, &bx, &vx)?;
        step[BASE_Z] = PiecewisePolynomial::hermite(&bt, &bz, &vz)?;

        // second step: mirrored partner shifted by one step in time and space
        let mut outputs = Vec::with_capacity(NUM_COORDINATES);
        for (c, name) in COORDINATE_NAMES.iter().enumerate() {
            let first = &step[c];
            let second = &step[mirror_index(c)];
            let shift = if c == BASE_X { s } else { 0.0 };
            let mut bps = first.breakpoints().to_vec();
            bps.extend(second.breakpoints()[1..].iter().map(|b| b + ts));
            let mut coeffs = first.coefficients().to_vec();
            coeffs.extend(second.coefficients().iter().map(|row| {
                let mut row = row.clone();
                row[0] += shift;
                row
            }));
            outputs.push(OutputTrajectory {
                name: name.to_string(),
                poly: PiecewisePolynomial::new(bps, coeffs)?,
                period_offset: if c == BASE_X { self.step_length } else { 0.0 },
            });
        }
        let names = |p: usize| vec![model.contacts()[p].name.clone()];
        let modes = vec![
            Mode {
                name: "left_stance".into(),
                start: 0.0,
                end: ts,
                contacts: names(left),
            },
            Mode {
                name: "right_stance".into(),
                start: ts,
                end: self.period,
                contacts: names(right),
            },
        ];
        ReferenceTrajectory::new(
            outputs,
            modes,
            vec![ts, self.period],
            Some(self.period),
            vec![
                ("left_hip".into(), "right_hip".into()),
                ("left_knee".into(), "right_knee".into()),
            ],
        )
    }
}

fn mirror_index(c: usize) -> usize {
    match c {
        LEFT_HIP => RIGHT_HIP,
        RIGHT_HIP => LEFT_HIP,
        LEFT_KNEE => RIGHT_KNEE,
        RIGHT_KNEE => LEFT_KNEE,
        other => other,
    }
}

fn mirror(x: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| x[mirror_index(i)])
}
