use nalgebra::{DMatrix, DVector, Vector2};

use super::config::Terrain;
use crate::dynamics::{
    bias_forces, contact_jacobian, contact_jacobian_dot_v, contact_point_jacobian, contact_point_position,
    contact_point_velocity, kinetic_energy, mass_matrix, potential_energy,
};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::model::{ContactSet, RobotModel, RobotState};

/// Active stance contacts pinned at world anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct Stance {
    pub contacts: ContactSet,
    pub anchors: Vec<Vector2<f64>>,
}

impl Stance {
    pub fn flight() -> Self {
        Self {
            contacts: ContactSet::empty(),
            anchors: Vec::new(),
        }
    }

    /// Pins every point of `contacts` where it currently is.
    pub fn at_current(model: &RobotModel, q: &DVector<f64>, contacts: &ContactSet) -> Result<Self> {
        let anchors = contacts
            .points()
            .iter()
            .map(|&p| contact_point_position(model, q, p))
            .collect::<Result<_>>()?;
        Ok(Self {
            contacts: contacts.clone(),
            anchors,
        })
    }

    pub fn with(&self, point: usize, anchor: Vector2<f64>) -> Self {
        let mut s = self.clone();
        if !s.contacts.contains(point) {
            s.contacts = s.contacts.with(point);
            s.anchors.push(anchor);
        }
        s
    }

    pub fn without(&self, point: usize) -> Self {
        let keep: Vec<usize> = (0..self.contacts.len())
            .filter(|&i| self.contacts.points()[i] != point)
            .collect();
        Self {
            contacts: self.contacts.without(point),
            anchors: keep.iter().map(|&i| self.anchors[i]).collect(),
        }
    }

    /// Position violation `p(q) − anchor`, stacked like the contact Jacobian.
    pub fn violation(&self, model: &RobotModel, q: &DVector<f64>) -> Result<DVector<f64>> {
        let mut phi = DVector::zeros(self.contacts.dim());
        for (i, (&p, a)) in self.contacts.points().iter().zip(&self.anchors).enumerate() {
            let pos = contact_point_position(model, q, p)?;
            phi[2 * i] = pos.x - a.x;
            phi[2 * i + 1] = pos.y - a.y;
        }
        Ok(phi)
    }
}

/// Baumgarte stabilization `φ̈ + 2ζω φ̇ + ω² φ = 0` on stance constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baumgarte {
    pub omega: f64,
    pub zeta: f64,
}

impl Default for Baumgarte {
    fn default() -> Self {
        Self { omega: 100.0, zeta: 1.0 }
    }
}

/// Penalty ground parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompliantGround {
    pub penetration_allowance: f64,
    pub damping: f64,
    pub friction_velocity: f64,
}

impl CompliantGround {
    /// Stiffness at which the full robot weight rests at the allowance.
    pub fn stiffness(&self, model: &RobotModel) -> f64 {
        model.total_mass() * model.gravity() / self.penetration_allowance
    }
}

/// Result of one integration step.
#[derive(Debug, Clone)]
pub struct Step {
    pub state: RobotState,
    /// Contact forces at the start of the step, 2 per active point (or per
    /// model point for compliant ground).
    pub lambda: DVector<f64>,
    pub actuator_work: f64,
    pub contact_work: f64,
}

/// Solves `M v̇ + h = B u + Jᵀλ` with stabilized stance constraints.
pub fn constrained_forward_dynamics(
    model: &RobotModel,
    q: &DVector<f64>,
    v: &DVector<f64>,
    u: &DVector<f64>,
    stance: &Stance,
    baumgarte: Baumgarte,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_dim("torques", model.num_actuators(), u.len())?;
    let n = model.num_velocities();
    let c = stance.contacts.dim();
    let m = mass_matrix(model, q)?;
    let tau = model.actuation_matrix() * u - bias_forces(model, q, v)?;
    if c == 0 {
        let vdot = m.cholesky().ok_or(Error::SingularDynamics)?.solve(&tau);
        return Ok((vdot, DVector::zeros(0)));
    }
    let j = contact_jacobian(model, q, &stance.contacts)?;
    let jv = &j * v;
    let phi = stance.violation(model, q)?;
    let rhs_c = -contact_jacobian_dot_v(model, q, v, &stance.contacts)?
        - jv * (2.0 * baumgarte.zeta * baumgarte.omega)
        - phi * baumgarte.omega.powi(2);
    let mut a = DMatrix::zeros(n + c, n + c);
    a.view_mut((0, 0), (n, n)).copy_from(&m);
    a.view_mut((0, n), (n, c)).copy_from(&(-j.transpose()));
    a.view_mut((n, 0), (c, n)).copy_from(&j);
    let mut rhs = DVector::zeros(n + c);
    rhs.rows_mut(0, n).copy_from(&tau);
    rhs.rows_mut(n, c).copy_from(&rhs_c);
    let sol = match a.clone().lu().solve(&rhs) {
        Some(s) if s.iter().all(|x| x.is_finite()) => s,
        _ => linalg::pseudo_inverse(&a, linalg::RANK_TOLERANCE) * &rhs,
    };
    if !sol.iter().all(|x| x.is_finite()) {
        return Err(Error::SingularDynamics);
    }
    Ok((sol.rows(0, n).into_owned(), sol.rows(n, c).into_owned()))
}

/// Penalty force on every model contact point, as `(f_x, f_z)` pairs.
///
/// Normal force `k·δ·max(0, 1 + d·δ̇)` with penetration `δ = max(0, −φ)`, and
/// tangential friction `−μ f_n tanh(ẋ / v_s)`.
pub fn compliant_contact_force(
    model: &RobotModel,
    q: &DVector<f64>,
    v: &DVector<f64>,
    terrain: &Terrain,
    ground: &CompliantGround,
) -> Result<Vec<Vector2<f64>>> {
    let k = ground.stiffness(model);
    (0..model.contacts().len())
        .map(|p| {
            let pos = contact_point_position(model, q, p)?;
            let vel = contact_point_velocity(model, q, v, p)?;
            let depth = (terrain.height_at(pos.x) - pos.y).max(0.0);
            if depth == 0.0 {
                return Ok(Vector2::zeros());
            }
            let fn_ = k * depth * (1.0 - ground.damping * vel.y).max(0.0);
            let ft = -model.mu() * fn_ * (vel.x / ground.friction_velocity).tanh();
            Ok(Vector2::new(ft, fn_))
        })
        .collect()
}

/// Time derivative of the augmented state `(q, v, W_act, W_contact)`.
type Derivative = (DVector<f64>, DVector<f64>, f64, f64);

fn rk4<F>(state: &RobotState, dt: f64, mut f: F) -> Result<(RobotState, f64, f64)>
where
    F: FnMut(&DVector<f64>, &DVector<f64>) -> Result<Derivative>,
{
    let (q0, v0) = (&state.q, &state.v);
    let k1 = f(q0, v0)?;
    let k2 = f(&(q0 + &k1.0 * (dt / 2.0)), &(v0 + &k1.1 * (dt / 2.0)))?;
    let k3 = f(&(q0 + &k2.0 * (dt / 2.0)), &(v0 + &k2.1 * (dt / 2.0)))?;
    let k4 = f(&(q0 + &k3.0 * dt), &(v0 + &k3.1 * dt))?;
    let w = dt / 6.0;
    let q = q0 + (&k1.0 + &k2.0 * 2.0 + &k3.0 * 2.0 + &k4.0) * w;
    let v = v0 + (&k1.1 + &k2.1 * 2.0 + &k3.1 * 2.0 + &k4.1) * w;
    let wa = (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2) * w;
    let wc = (k1.3 + 2.0 * k2.3 + 2.0 * k3.3 + k4.3) * w;
    Ok((RobotState { q, v, t: state.t + dt }, wa, wc))
}

/// One RK4 step of the constrained dynamics under a held torque.
pub fn step_rigid(
    model: &RobotModel,
    state: &RobotState,
    stance: &Stance,
    u: &DVector<f64>,
    dt: f64,
    baumgarte: Baumgarte,
) -> Result<Step> {
    let bu = model.actuation_matrix() * u;
    let mut lambda = None;
    let (next, wa, wc) = rk4(state, dt, |q, v| {
        let (vdot, lam) = constrained_forward_dynamics(model, q, v, u, stance, baumgarte)?;
        let jv = contact_jacobian(model, q, &stance.contacts)? * v;
        let pc = lam.dot(&jv);
        lambda.get_or_insert(lam);
        Ok((v.clone(), vdot, bu.dot(v), pc))
    })?;
    Ok(Step {
        state: next,
        lambda: lambda.unwrap_or_default(),
        actuator_work: wa,
        contact_work: wc,
    })
}

/// One RK4 step on penalty ground; `lambda` holds forces on every model point.
pub fn step_compliant(
    model: &RobotModel,
    state: &RobotState,
    u: &DVector<f64>,
    dt: f64,
    terrain: &Terrain,
    ground: &CompliantGround,
) -> Result<Step> {
    check_dim("torques", model.num_actuators(), u.len())?;
    let bu = model.actuation_matrix() * u;
    let mut lambda = None;
    let (next, wa, wc) = rk4(state, dt, |q, v| {
        let forces = compliant_contact_force(model, q, v, terrain, ground)?;
        let mut gen = &bu - bias_forces(model, q, v)?;
        let mut pc = 0.0;
        for (p, f) in forces.iter().enumerate() {
            if *f == Vector2::zeros() {
                continue;
            }
            let jp = contact_point_jacobian(model, q, p)?;
            gen += jp.transpose() * DVector::from_column_slice(f.as_slice());
            pc += f.dot(&contact_point_velocity(model, q, v, p)?);
        }
        let vdot = mass_matrix(model, q)?.cholesky().ok_or(Error::SingularDynamics)?.solve(&gen);
        lambda.get_or_insert_with(|| DVector::from_iterator(2 * forces.len(), forces.iter().flat_map(|f| [f.x, f.y])));
        Ok((v.clone(), vdot, bu.dot(v), pc))
    })?;
    Ok(Step {
        state: next,
        lambda: lambda.unwrap_or_default(),
        actuator_work: wa,
        contact_work: wc,
    })
}

/// Kinetic plus potential energy.
pub fn total_energy(model: &RobotModel, state: &RobotState) -> Result<f64> {
    Ok(kinetic_energy(model, &state.q, &state.v)? + potential_energy(model, &state.q)?)
}

/// Height of a contact point above the terrain beneath it.
pub fn clearance(model: &RobotModel, q: &DVector<f64>, point: usize, terrain: &Terrain) -> Result<f64> {
    let p = contact_point_position(model, q, point)?;
    Ok(p.y - terrain.height_at(p.x))
}

/// Earliest time in `(prev.t, next.t]` at which a point outside `exclude`
/// crosses the terrain from above, with the crossing point.
///
/// The foot path between the two states is a cubic Hermite interpolant of
/// its positions and velocities; the crossing is bisected until the
/// interpolated clearance is within `tol`.
pub fn detect_touchdown(
    model: &RobotModel,
    prev: &RobotState,
    next: &RobotState,
    exclude: &ContactSet,
    terrain: &Terrain,
    tol: f64,
) -> Result<Option<(f64, usize)>> {
    let h = next.t - prev.t;
    let mut best: Option<(f64, usize)> = None;
    for p in (0..model.contacts().len()).filter(|&p| !exclude.contains(p)) {
        let (p0, p1) = (contact_point_position(model, &prev.q, p)?, contact_point_position(model, &next.q, p)?);
        if p0.y - terrain.height_at(p0.x) <= 0.0 || p1.y - terrain.height_at(p1.x) > 0.0 {
            continue;
        }
        let (d0, d1) = (
            contact_point_velocity(model, &prev.q, &prev.v, p)? * h,
            contact_point_velocity(model, &next.q, &next.v, p)? * h,
        );
        let path = |s: f64| {
            let (s2, s3) = (s * s, s * s * s);
            let pos = p0 * (2.0 * s3 - 3.0 * s2 + 1.0)
                + d0 * (s3 - 2.0 * s2 + s)
                + p1 * (-2.0 * s3 + 3.0 * s2)
                + d1 * (s3 - s2);
            pos.y - terrain.height_at(pos.x)
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let c = path(mid);
            if c.abs() <= tol {
                hi = mid;
                break;
            }
            if c > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = prev.t + h * hi;
        if best.is_none_or(|(tb, _)| t < tb) {
            best = Some((t, p));
        }
    }
    Ok(best)
}
