//! Joint-space inverse dynamics and operational space control, driven by a
//! time-based FSM, each in three variants that differ only inside the
//! projection window around nominal impacts.
//!
//! Commanded output accelerations use stabilizing PD feedback,
//! `ÿ_cmd = ÿ_des + K_p (y_des − y) + K_d (ẏ_des − ẏ)`.

mod fsm;
mod joint;
mod osc;
mod spec;

pub use fsm::{Fsm, FsmState};
pub use joint::constrained_inverse_dynamics;
pub use spec::{ControllerKind, ControllerSpec, OutputDef, OutputKind, ProjectionMode, Variant};

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{contact_jacobian_dot_v, contact_point_jacobian, contact_point_position};
use crate::error::{Error, Result};
use crate::model::{ContactSet, RobotModel, RobotState, NUM_COORDINATES};
use crate::qp::QpStatus;
use crate::trajectory::{ReferenceTrajectory, Side};

/// Per-output tracking diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputError {
    pub name: String,
    pub position: DVector<f64>,
    /// Raw velocity error `ẏ_des − ẏ`.
    pub velocity: DVector<f64>,
    /// Velocity error actually fed back (after variant handling).
    pub feedback_velocity: DVector<f64>,
    pub accel_cmd: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlCommand {
    pub t: f64,
    pub u: DVector<f64>,
    /// Feedforward torque realizing the reference acceleration.
    pub u_ff: DVector<f64>,
    pub lambda: DVector<f64>,
    pub vdot: DVector<f64>,
    pub mode: String,
    pub alpha: f64,
    pub in_window: bool,
    /// Torques hit the actuator limit.
    pub saturated: bool,
    /// The QP failed and the feedforward command was used instead.
    pub fallback: bool,
    pub qp_status: Option<QpStatus>,
    pub qp_iterations: usize,
    pub outputs: Vec<OutputError>,
}

/// Output quantities at the measured and desired states.
#[derive(Debug, Clone)]
pub(crate) struct OutputEval {
    pub y: DVector<f64>,
    pub jac: DMatrix<f64>,
    pub jdot_v: DVector<f64>,
    pub y_des: DVector<f64>,
    pub yd_des: DVector<f64>,
    pub ydd_des: DVector<f64>,
}

pub(crate) struct Reference {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub a: DVector<f64>,
}

pub(crate) fn eval_output(model: &RobotModel, def: &OutputDef, state: &RobotState, r: &Reference) -> Result<OutputEval> {
    match def.kind {
        OutputKind::Coordinate(c) => {
            let mut jac = DMatrix::zeros(1, NUM_COORDINATES);
            jac[(0, c)] = 1.0;
            Ok(OutputEval {
                y: DVector::from_element(1, state.q[c]),
                jac,
                jdot_v: DVector::zeros(1),
                y_des: DVector::from_element(1, r.q[c]),
                yd_des: DVector::from_element(1, r.v[c]),
                ydd_des: DVector::from_element(1, r.a[c]),
            })
        }
        OutputKind::ContactPoint(p) => {
            let single = ContactSet::single(p);
            let y = contact_point_position(model, &state.q, p)?;
            let jac = contact_point_jacobian(model, &state.q, p)?;
            let jdot_v = contact_jacobian_dot_v(model, &state.q, &state.v, &single)?;
            let y_des = contact_point_position(model, &r.q, p)?;
            let jac_des = contact_point_jacobian(model, &r.q, p)?;
            let yd_des = &jac_des * &r.v;
            let ydd_des = &jac_des * &r.a + contact_jacobian_dot_v(model, &r.q, &r.v, &single)?;
            Ok(OutputEval {
                y: DVector::from_column_slice(y.as_slice()),
                jac,
                jdot_v,
                y_des: DVector::from_column_slice(y_des.as_slice()),
                yd_des,
                ydd_des,
            })
        }
    }
}

pub(crate) fn reference_at(traj: &ReferenceTrajectory, t: f64) -> Result<Reference> {
    let (q, v, a) = traj.eval_coordinates(t, Side::Post)?;
    Ok(Reference { q, v, a })
}

/// Stateful controller: owns the configuration and the QP warm start.
#[derive(Debug, Clone)]
pub struct Controller {
    model: RobotModel,
    spec: ControllerSpec,
    traj: ReferenceTrajectory,
    fsm: Fsm,
    warm_start: Option<DVector<f64>>,
}

impl Controller {
    pub fn new(model: RobotModel, spec: ControllerSpec, traj: ReferenceTrajectory) -> Result<Self> {
        spec.validate(&model)?;
        if !traj.has_coordinates() {
            return Err(Error::InvalidController(
                "reference trajectory must provide every generalized coordinate".into(),
            ));
        }
        let fsm = Fsm::new(spec.window_half_width, spec.tau)?;
        Ok(Self {
            model,
            spec,
            traj,
            fsm,
            warm_start: None,
        })
    }

    pub fn model(&self) -> &RobotModel {
        &self.model
    }

    pub fn spec(&self) -> &ControllerSpec {
        &self.spec
    }

    pub fn trajectory(&self) -> &ReferenceTrajectory {
        &self.traj
    }

    pub fn fsm_state(&self, t: f64) -> Result<FsmState> {
        self.fsm.state(&self.model, &self.traj, t)
    }

    pub fn clear_warm_start(&mut self) {
        self.warm_start = None;
    }

    /// Command for the measured state at time `state.t`.
    pub fn compute(&mut self, state: &RobotState) -> Result<ControlCommand> {
        let fsm = self.fsm_state(state.t)?;
        match self.spec.kind {
            ControllerKind::JointSpace => joint::control(&self.model, &self.spec, &self.traj, &fsm, state),
            ControllerKind::Osc => {
                let (cmd, z) = osc::control(&self.model, &self.spec, &self.traj, &fsm, state, self.warm_start.as_ref())?;
                self.warm_start = z;
                Ok(cmd)
            }
        }
    }
}

/// Joint-space inverse dynamics command at time `t` (stateless).
pub fn joint_space_control(
    model: &RobotModel,
    state: &RobotState,
    traj: &ReferenceTrajectory,
    spec: &ControllerSpec,
    t: f64,
) -> Result<ControlCommand> {
    let spec = ControllerSpec {
        kind: ControllerKind::JointSpace,
        ..spec.clone()
    };
    Controller::new(model.clone(), spec, traj.clone())?.compute(&RobotState { t, ..state.clone() })
}

/// Operational space control command at time `t` (stateless, no warm start).
pub fn osc_control(
    model: &RobotModel,
    state: &RobotState,
    traj: &ReferenceTrajectory,
    spec: &ControllerSpec,
    t: f64,
) -> Result<ControlCommand> {
    let spec = ControllerSpec {
        kind: ControllerKind::Osc,
        ..spec.clone()
    };
    Controller::new(model.clone(), spec, traj.clone())?.compute(&RobotState { t, ..state.clone() })
}

/// Commanded acceleration `ÿ_des + K_p e + K_d ė` for one output.
pub(crate) fn accel_command(def: &OutputDef, ev: &OutputEval, e_vel: &DVector<f64>, kd_scale: f64) -> DVector<f64> {
    let e_pos = &ev.y_des - &ev.y;
    DVector::from_fn(def.dim(), |i, _| {
        ev.ydd_des[i] + def.kp[i] * e_pos[i] + kd_scale * def.kd[i] * e_vel[i]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{bias_forces, contact_jacobian, mass_matrix};
    use crate::impact::invariant_basis;
    use crate::trajectory::generate_walking_gait;

    fn setup() -> (RobotModel, ReferenceTrajectory) {
        let m = RobotModel::five_link();
        let g = generate_walking_gait(&m, 0.3, 0.7, 0.08).unwrap();
        (m, g)
    }

    fn reference_state(g: &ReferenceTrajectory, t: f64) -> RobotState {
        let (q, v, _) = g.eval_coordinates(t, Side::Post).unwrap();
        RobotState::new(q, v, t).unwrap()
    }

    fn run(m: &RobotModel, g: &ReferenceTrajectory, spec: &ControllerSpec, s: &RobotState) -> ControlCommand {
        Controller::new(m.clone(), spec.clone(), g.clone()).unwrap().compute(s).unwrap()
    }

    fn max_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn zero_error_gives_feedforward() {
        let (m, g) = setup();
        let spec = ControllerSpec {
            torque_limit: Some(1e6),
            ..ControllerSpec::joint_space_default()
        };
        for t in [0.1, 0.34, 0.36] {
            let s = reference_state(&g, t);
            for v in Variant::ALL {
                let cmd = run(&m, &g, &spec.clone().with_variant(v), &s);
                assert!(max_diff(&cmd.u, &cmd.u_ff) < 1e-9, "{v:?} at {t}");
            }
        }
    }

    #[test]
    fn impact_invariant_ignores_impulsive_errors() {
        let (m, g) = setup();
        let base = ControllerSpec {
            tau: 1e-6,
            torque_limit: Some(1e6),
            ..ControllerSpec::joint_space_default()
        };
        let t = 0.345;
        let mut s = reference_state(&g, t);
        let right = ContactSet::from_names(&m, &["right_foot"]).unwrap();
        let mass = mass_matrix(&m, &s.q).unwrap();
        let jac = contact_jacobian(&m, &s.q, &right).unwrap();
        let kick = mass.lu().solve(&(jac.transpose() * DVector::from_vec(vec![3.0, -5.0]))).unwrap();
        s.v += kick;
        let ii = run(&m, &g, &base.clone().with_variant(Variant::ImpactInvariant), &s);
        let nd = run(&m, &g, &base.clone().with_variant(Variant::NoDerivativeWindow), &s);
        let df = run(&m, &g, &base.clone().with_variant(Variant::Default), &s);
        assert!(ii.in_window && ii.alpha > 1.0 - 1e-12);
        assert!(max_diff(&ii.u, &nd.u) < 1e-8);
        assert!(max_diff(&ii.u, &df.u) > 1e-3);
    }

    #[test]
    fn impact_invariant_keeps_invariant_errors() {
        let (m, g) = setup();
        let base = ControllerSpec {
            torque_limit: Some(1e6),
            ..ControllerSpec::joint_space_default()
        };
        let t = 0.345;
        let mut s = reference_state(&g, t);
        let right = ContactSet::from_names(&m, &["right_foot"]).unwrap();
        let q = invariant_basis(&m, &s.q, &right).unwrap().projector;
        let w = DVector::from_vec(vec![0.1, -0.2, 0.3, 0.5, -0.4, 0.2, 0.7]);
        s.v -= q * w;
        let ii = run(&m, &g, &base.clone().with_variant(Variant::ImpactInvariant), &s);
        let nd = run(&m, &g, &base.clone().with_variant(Variant::NoDerivativeWindow), &s);
        let df = run(&m, &g, &base.clone().with_variant(Variant::Default), &s);
        assert!(max_diff(&ii.u, &df.u) < 1e-10);
        assert!(max_diff(&ii.u, &nd.u) > 1e-3);
    }

    #[test]
    fn variants_agree_outside_window() {
        let (m, g) = setup();
        for base in [ControllerSpec::joint_space_default(), ControllerSpec::osc_default(&m).unwrap()] {
            let mut s = reference_state(&g, 0.2);
            s.v[4] += 0.3;
            s.q[6] -= 0.02;
            let cmds: Vec<_> = Variant::ALL
                .iter()
                .map(|&v| run(&m, &g, &base.clone().with_variant(v), &s))
                .collect();
            assert!(!cmds[0].in_window);
            assert_eq!(cmds[0].u, cmds[1].u);
            assert_eq!(cmds[0].u, cmds[2].u);
        }
    }

    #[test]
    fn osc_satisfies_dynamics_and_contact() {
        let (m, g) = setup();
        let spec = ControllerSpec::osc_default(&m).unwrap();
        for (t, dv) in [(0.1, 0.2), (0.3, -0.3), (0.5, 0.1)] {
            let mut s = reference_state(&g, t);
            s.v[5] += dv;
            s.v[1] -= dv;
            let cmd = run(&m, &g, &spec, &s);
            assert!(!cmd.fallback);
            let fsm = Fsm::new(0.025, 0.005).unwrap().state(&m, &g, t).unwrap();
            let mass = mass_matrix(&m, &s.q).unwrap();
            let h = bias_forces(&m, &s.q, &s.v).unwrap();
            let j = contact_jacobian(&m, &s.q, &fsm.contacts).unwrap();
            let jdv = contact_jacobian_dot_v(&m, &s.q, &s.v, &fsm.contacts).unwrap();
            let dyn_res = &mass * &cmd.vdot + h - m.actuation_matrix() * &cmd.u - j.transpose() * &cmd.lambda;
            assert!(dyn_res.amax() < 1e-8, "{}", dyn_res.amax());
            assert!((&j * &cmd.vdot + jdv).amax() < 1e-8);
            for p in 0..fsm.contacts.len() {
                let (lt, ln) = (cmd.lambda[2 * p], cmd.lambda[2 * p + 1]);
                assert!(ln >= -1e-10 && m.mu() * ln - lt.abs() >= -1e-10);
            }
        }
    }

    #[test]
    fn osc_tracks_attainable_command_exactly() {
        let (m, g) = setup();
        let spec = ControllerSpec {
            force_regularization: 0.0,
            torque_limit: Some(1e6),
            ..ControllerSpec::osc_default(&m).unwrap()
        };
        let s = reference_state(&g, 0.15);
        let cmd = run(&m, &g, &spec, &s);
        let r = reference_at(&g, s.t).unwrap();
        let fsm = Fsm::new(0.025, 0.005).unwrap().state(&m, &g, s.t).unwrap();
        for def in spec.outputs.iter().filter(|o| o.active_in(&fsm.mode)) {
            let ev = eval_output(&m, def, &s, &r).unwrap();
            let realized = &ev.jac * &cmd.vdot + &ev.jdot_v;
            let target = &cmd.outputs.iter().find(|o| o.name == def.name).unwrap().accel_cmd;
            assert!(max_diff(&realized, target) < 1e-6, "{} {}", def.name, max_diff(&realized, target));
        }
    }

    #[test]
    fn impacting_foot_output_has_no_feedback() {
        let (m, g) = setup();
        let spec = ControllerSpec {
            tau: 1e-6,
            ..ControllerSpec::osc_default(&m).unwrap().with_variant(Variant::ImpactInvariant)
        };
        let mut s = reference_state(&g, 0.345);
        s.v[5] += 0.4;
        s.v[6] -= 0.3;
        let cmd = run(&m, &g, &spec, &s);
        let foot = cmd.outputs.iter().find(|o| o.name == "right_foot_swing").unwrap();
        assert!(foot.velocity.amax() > 1e-2);
        assert!(foot.feedback_velocity.amax() < 1e-12, "{}", foot.feedback_velocity);
    }

    #[test]
    fn stacked_projection_keeps_shared_feedback() {
        let (m, g) = setup();
        let per_output = ControllerSpec {
            tau: 1e-6,
            ..ControllerSpec::osc_default(&m).unwrap().with_variant(Variant::ImpactInvariant)
        };
        let stacked = ControllerSpec {
            projection: ProjectionMode::Stacked,
            ..per_output.clone()
        };
        let mut s = reference_state(&g, 0.345);
        s.v[2] += 0.5;
        s.v[5] += 0.4;
        let pitch = |cmd: &ControlCommand| {
            cmd.outputs.iter().find(|o| o.name == "torso_pitch").unwrap().feedback_velocity.amax()
        };
        let a = run(&m, &g, &per_output, &s);
        let b = run(&m, &g, &stacked, &s);
        // a single-row output is always reachable by some impulse
        assert!(pitch(&a) < 1e-12, "{}", pitch(&a));
        assert!(pitch(&b) > 1e-3, "{}", pitch(&b));
    }

    #[test]
    fn torques_are_clipped() {
        let (m, g) = setup();
        let spec = ControllerSpec {
            torque_limit: Some(1.0),
            ..ControllerSpec::joint_space_default()
        };
        let mut s = reference_state(&g, 0.2);
        s.v[3] += 5.0;
        let cmd = run(&m, &g, &spec, &s);
        assert!(cmd.saturated && cmd.u.amax() <= 1.0);
    }
}
