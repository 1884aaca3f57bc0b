use nalgebra::{DMatrix, DVector};

use super::{
    accel_command, constrained_inverse_dynamics, eval_output, reference_at, ControlCommand, ControllerSpec, FsmState,
    OutputError, OutputEval, ProjectionMode, Variant,
};
use crate::dynamics::{bias_forces, contact_jacobian, contact_jacobian_dot_v, mass_matrix};
use crate::error::Result;
use crate::model::{RobotModel, RobotState};
use crate::projection::{projected_error, task_space_correction_with};
use crate::qp::{QProblem, QpSolver, QpStatus};
use crate::trajectory::ReferenceTrajectory;

/// Returns the command and the QP primal for warm starting the next solve.
pub(crate) fn control(
    model: &RobotModel,
    spec: &ControllerSpec,
    traj: &ReferenceTrajectory,
    fsm: &FsmState,
    state: &RobotState,
    warm_start: Option<&DVector<f64>>,
) -> Result<(ControlCommand, Option<DVector<f64>>)> {
    let n = model.num_velocities();
    let k = model.num_actuators();
    let contacts = &fsm.contacts;
    let c = contacts.dim();
    let r = reference_at(traj, state.t)?;
    let mass = mass_matrix(model, &state.q)?;
    let bias = bias_forces(model, &state.q, &state.v)?;
    let jc = contact_jacobian(model, &state.q, contacts)?;
    let jc_dot_v = contact_jacobian_dot_v(model, &state.q, &state.v, contacts)?;

    let active: Vec<_> = spec.outputs.iter().filter(|o| o.active_in(&fsm.mode)).collect();
    let evals: Vec<OutputEval> = active
        .iter()
        .map(|d| eval_output(model, d, state, &r))
        .collect::<Result<_>>()?;

    // raw velocity errors, and the fed-back errors after variant handling
    let raw: Vec<DVector<f64>> = evals.iter().map(|ev| &ev.yd_des - &ev.jac * &state.v).collect();
    let (fb, kd_scale): (Vec<DVector<f64>>, f64) = match (spec.variant, fsm.in_window) {
        (Variant::NoDerivativeWindow, true) => (raw.clone(), 0.0),
        (Variant::ImpactInvariant, true) if !fsm.impacting.is_empty() => {
            let j_imp = contact_jacobian(model, &state.q, &fsm.impacting)?;
            let projected = match spec.projection {
                // each output gets its own impulse correction, so an output
                // that moves with the impacting foot is fully projected away
                ProjectionMode::PerOutput => evals
                    .iter()
                    .map(|ev| {
                        let corr = task_space_correction_with(&mass, &j_imp, &ev.jac, &ev.yd_des, &state.v)?;
                        projected_error(&ev.yd_des, &ev.jac, &state.v, &corr, fsm.alpha)
                    })
                    .collect::<Result<_>>()?,
                ProjectionMode::Stacked => {
                    let rows: usize = evals.iter().map(|ev| ev.jac.nrows()).sum();
                    let mut jac = DMatrix::zeros(rows, n);
                    let mut yd = DVector::zeros(rows);
                    let mut r0 = 0;
                    for ev in &evals {
                        let d = ev.jac.nrows();
                        jac.rows_mut(r0, d).copy_from(&ev.jac);
                        yd.rows_mut(r0, d).copy_from(&ev.yd_des);
                        r0 += d;
                    }
                    let corr = task_space_correction_with(&mass, &j_imp, &jac, &yd, &state.v)?;
                    evals
                        .iter()
                        .map(|ev| projected_error(&ev.yd_des, &ev.jac, &state.v, &corr, fsm.alpha))
                        .collect::<Result<_>>()?
                }
            };
            (projected, 1.0)
        }
        _ => (raw.clone(), 1.0),
    };

    // cost over z = [v̇, u, λ]
    let m = n + k + c;
    let mut h = DMatrix::zeros(m, m);
    let mut f = DVector::zeros(m);
    let mut outputs = Vec::with_capacity(active.len());
    for (i, (def, ev)) in active.iter().zip(&evals).enumerate() {
        let cmd = accel_command(def, ev, &fb[i], kd_scale);
        let w = DMatrix::from_diagonal(&DVector::from_column_slice(&def.weight));
        let jtw = ev.jac.transpose() * &w;
        let mut hv = h.view_mut((0, 0), (n, n));
        hv += &jtw * &ev.jac;
        let mut fv = f.rows_mut(0, n);
        fv += &jtw * (&ev.jdot_v - &cmd);
        outputs.push(OutputError {
            name: def.name.clone(),
            position: &ev.y_des - &ev.y,
            velocity: raw[i].clone(),
            feedback_velocity: kd_scale * &fb[i],
            accel_cmd: cmd,
        });
    }
    for i in 0..c {
        h[(n + k + i, n + k + i)] += spec.force_regularization;
    }

    // dynamics and holonomic equalities
    let b = model.actuation_matrix();
    let mut a_eq = DMatrix::zeros(n + c, m);
    let mut b_eq = DVector::zeros(n + c);
    a_eq.view_mut((0, 0), (n, n)).copy_from(&mass);
    a_eq.view_mut((0, n), (n, k)).copy_from(&(-&b));
    a_eq.view_mut((0, n + k), (n, c)).copy_from(&(-jc.transpose()));
    b_eq.rows_mut(0, n).copy_from(&(-&bias));
    a_eq.view_mut((n, 0), (c, n)).copy_from(&jc);
    b_eq.rows_mut(n, c).copy_from(&(-&jc_dot_v));

    // friction cone per point (x tangential, z normal) and torque bounds
    let npts = contacts.len();
    let limit = spec.torque_limit(model);
    let mu = model.mu();
    let mut a_in = DMatrix::zeros(3 * npts + 2 * k, m);
    let mut b_in = DVector::zeros(3 * npts + 2 * k);
    for p in 0..npts {
        let (t_col, n_col) = (n + k + 2 * p, n + k + 2 * p + 1);
        a_in[(3 * p, n_col)] = 1.0;
        a_in[(3 * p + 1, n_col)] = mu;
        a_in[(3 * p + 1, t_col)] = -1.0;
        a_in[(3 * p + 2, n_col)] = mu;
        a_in[(3 * p + 2, t_col)] = 1.0;
    }
    for i in 0..k {
        let r0 = 3 * npts + 2 * i;
        a_in[(r0, n + i)] = 1.0;
        b_in[r0] = -limit;
        a_in[(r0 + 1, n + i)] = -1.0;
        b_in[r0 + 1] = -limit;
    }

    let problem = QProblem::new(h, f, a_eq, b_eq, a_in, b_in)?;
    let warm = warm_start.filter(|w| w.len() == m);
    let sol = QpSolver::default().solve(&problem, warm);

    let acc_ff = DVector::from_iterator(k, model.actuated_coordinates().iter().map(|&i| r.a[i]));
    let (vdot_ff, u_ff_raw, lambda_ff) = constrained_inverse_dynamics(model, &state.q, &state.v, contacts, &acc_ff)?;
    let u_ff = u_ff_raw.map(|x| x.clamp(-limit, limit));

    let cmd = if sol.status == QpStatus::Optimal {
        let u = sol.z.rows(n, k).into_owned();
        ControlCommand {
            t: state.t,
            saturated: u.iter().any(|x| x.abs() >= limit * (1.0 - 1e-9)),
            u,
            u_ff,
            lambda: sol.z.rows(n + k, c).into_owned(),
            vdot: sol.z.rows(0, n).into_owned(),
            mode: fsm.mode.clone(),
            alpha: fsm.alpha,
            in_window: fsm.in_window,
            fallback: false,
            qp_status: Some(sol.status),
            qp_iterations: sol.iterations,
            outputs,
        }
    } else {
        ControlCommand {
            t: state.t,
            saturated: u_ff_raw.iter().any(|x| x.abs() > limit),
            u: u_ff.clone(),
            u_ff,
            lambda: lambda_ff,
            vdot: vdot_ff,
            mode: fsm.mode.clone(),
            alpha: fsm.alpha,
            in_window: fsm.in_window,
            fallback: true,
            qp_status: Some(sol.status),
            qp_iterations: sol.iterations,
            outputs,
        }
    };
    let next = (sol.status == QpStatus::Optimal).then_some(sol.z);
    Ok((cmd, next))
}
