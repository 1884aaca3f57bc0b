use nalgebra::{DMatrix, DVector};

use super::{accel_command, eval_output, reference_at, ControlCommand, ControllerSpec, FsmState, OutputError, OutputKind, Variant};
use crate::dynamics::{bias_forces, contact_jacobian, contact_jacobian_dot_v, mass_matrix};
use crate::error::{check_dim, Error, Result};
use crate::impact::invariant_basis;
use crate::linalg;
use crate::model::{ContactSet, RobotModel, RobotState};
use crate::trajectory::ReferenceTrajectory;

/// Solves `M v̇ + h = B u + Jᵀλ`, `J v̇ + J̇ v = 0` and `v̇_j = acc_j` on the
/// actuated joints for `(v̇, u, λ)`. Least squares when the system is singular
/// (for example with redundant contacts).
pub fn constrained_inverse_dynamics(
    model: &RobotModel,
    q: &DVector<f64>,
    v: &DVector<f64>,
    contacts: &ContactSet,
    acc: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let n = model.num_velocities();
    let k = model.num_actuators();
    check_dim("joint accelerations", k, acc.len())?;
    let c = contacts.dim();
    let m = mass_matrix(model, q)?;
    let h = bias_forces(model, q, v)?;
    let j = contact_jacobian(model, q, contacts)?;
    let jdv = contact_jacobian_dot_v(model, q, v, contacts)?;
    let b = model.actuation_matrix();

    let size = n + k + c;
    let mut a = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);
    a.view_mut((0, 0), (n, n)).copy_from(&m);
    a.view_mut((0, n), (n, k)).copy_from(&(-&b));
    a.view_mut((0, n + k), (n, c)).copy_from(&(-j.transpose()));
    rhs.rows_mut(0, n).copy_from(&(-&h));
    a.view_mut((n, 0), (c, n)).copy_from(&j);
    rhs.rows_mut(n, c).copy_from(&(-&jdv));
    for (row, &coord) in model.actuated_coordinates().iter().enumerate() {
        a[(n + c + row, coord)] = 1.0;
        rhs[n + c + row] = acc[row];
    }
    let sol = match a.clone().lu().solve(&rhs) {
        Some(s) if s.iter().all(|x| x.is_finite()) && linalg::max_abs_vec(&(&a * &s - &rhs)) < 1e-8 * (1.0 + rhs.amax()) => s,
        _ => linalg::pseudo_inverse(&a, linalg::RANK_TOLERANCE) * &rhs,
    };
    if !sol.iter().all(|x| x.is_finite()) {
        return Err(Error::SingularDynamics);
    }
    Ok((
        sol.rows(0, n).into_owned(),
        sol.rows(n, k).into_owned(),
        sol.rows(n + k, c).into_owned(),
    ))
}

pub(crate) fn control(
    model: &RobotModel,
    spec: &ControllerSpec,
    traj: &ReferenceTrajectory,
    fsm: &FsmState,
    state: &RobotState,
) -> Result<ControlCommand> {
    let r = reference_at(traj, state.t)?;
    let err_v = &r.v - &state.v;
    let (fb_v, kd_scale) = match (spec.variant, fsm.in_window) {
        (Variant::NoDerivativeWindow, true) => (err_v.clone(), 0.0),
        (Variant::ImpactInvariant, true) => {
            let q = invariant_basis(model, &state.q, &fsm.impacting)?.projector;
            ((1.0 - fsm.alpha) * &err_v + fsm.alpha * (q * &err_v), 1.0)
        }
        _ => (err_v.clone(), 1.0),
    };

    let actuated = model.actuated_coordinates();
    let mut acc = DVector::zeros(actuated.len());
    let mut acc_ff = DVector::zeros(actuated.len());
    let mut outputs = Vec::with_capacity(spec.outputs.len());
    for def in &spec.outputs {
        let OutputKind::Coordinate(c) = def.kind else {
            return Err(Error::InvalidController(format!("joint-space output {} must be a coordinate", def.name)));
        };
        let slot = actuated
            .iter()
            .position(|&a| a == c)
            .ok_or_else(|| Error::InvalidController(format!("output {} is not an actuated joint", def.name)))?;
        let ev = eval_output(model, def, state, &r)?;
        let e_vel = DVector::from_element(1, fb_v[c]);
        let cmd = accel_command(def, &ev, &e_vel, kd_scale);
        acc[slot] = cmd[0];
        acc_ff[slot] = r.a[c];
        outputs.push(OutputError {
            name: def.name.clone(),
            position: &ev.y_des - &ev.y,
            velocity: DVector::from_element(1, err_v[c]),
            feedback_velocity: kd_scale * e_vel,
            accel_cmd: cmd,
        });
    }

    let (vdot, u_raw, lambda) = constrained_inverse_dynamics(model, &state.q, &state.v, &fsm.contacts, &acc)?;
    let (_, u_ff, _) = constrained_inverse_dynamics(model, &state.q, &state.v, &fsm.contacts, &acc_ff)?;
    let limit = spec.torque_limit(model);
    let saturated = u_raw.iter().any(|x| x.abs() > limit);
    let u = u_raw.map(|x| x.clamp(-limit, limit));
    Ok(ControlCommand {
        t: state.t,
        u,
        u_ff,
        lambda,
        vdot,
        mode: fsm.mode.clone(),
        alpha: fsm.alpha,
        in_window: fsm.in_window,
        saturated,
        fallback: false,
        qp_status: None,
        qp_iterations: 0,
        outputs,
    })
}
