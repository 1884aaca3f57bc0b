//! Lagrangian dynamics and contact kinematics of the planar biped:
//! `M(q) v̇ + C(q, v) + g(q) = B u + J_λ(q)ᵀ λ`.
//!
//! Every body point is `base + Σ a_j d(φ_j)` with `d(φ) = (sin φ, −cos φ)` and
//! absolute link angles `φ_j` linear in `q`, so all Jacobians and their
//! derivatives have closed forms.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::{check_dim, Result};
use crate::model::{
    ContactSet, RobotModel, RobotState, Segments, BASE_X, BASE_Z, NUM_COORDINATES,
};

fn dir(phi: f64) -> Vector2<f64> {
    Vector2::new(phi.sin(), -phi.cos())
}

fn dir_prime(phi: f64) -> Vector2<f64> {
    Vector2::new(phi.cos(), phi.sin())
}

fn check_q(q: &DVector<f64>) -> Result<()> {
    check_dim("q", NUM_COORDINATES, q.len())
}

fn check_v(v: &DVector<f64>) -> Result<()> {
    check_dim("v", NUM_COORDINATES, v.len())
}

/// Absolute angle of a link.
pub fn link_angle(q: &DVector<f64>, link: usize) -> f64 {
    RobotModel::angle_coordinates(link).iter().map(|&i| q[i]).sum()
}

fn link_rate(v: &DVector<f64>, link: usize) -> f64 {
    RobotModel::angle_coordinates(link).iter().map(|&i| v[i]).sum()
}

pub(crate) fn point_position(q: &DVector<f64>, segs: &Segments) -> Vector2<f64> {
    let mut p = Vector2::new(q[BASE_X], q[BASE_Z]);
    for &(link, len) in segs {
        p += dir(link_angle(q, link)) * len;
    }
    p
}

pub(crate) fn point_jacobian(q: &DVector<f64>, segs: &Segments) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2, NUM_COORDINATES);
    j[(0, BASE_X)] = 1.0;
    j[(1, BASE_Z)] = 1.0;
    for &(link, len) in segs {
        let d = dir_prime(link_angle(q, link)) * len;
        for &c in RobotModel::angle_coordinates(link) {
            j[(0, c)] += d.x;
            j[(1, c)] += d.y;
        }
    }
    j
}

pub(crate) fn point_jdot_v(q: &DVector<f64>, v: &DVector<f64>, segs: &Segments) -> Vector2<f64> {
    let mut a = Vector2::zeros();
    for &(link, len) in segs {
        let w = link_rate(v, link);
        a -= dir(link_angle(q, link)) * (len * w * w);
    }
    a
}

/// ∂J/∂q_i for a body point.
pub(crate) fn point_jacobian_partial(q: &DVector<f64>, segs: &Segments, i: usize) -> DMatrix<f64> {
    let mut dj = DMatrix::zeros(2, NUM_COORDINATES);
    for &(link, len) in segs {
        let coords = RobotModel::angle_coordinates(link);
        if !coords.contains(&i) {
            continue;
        }
        let d = -dir(link_angle(q, link)) * len;
        for &c in coords {
            dj[(0, c)] += d.x;
            dj[(1, c)] += d.y;
        }
    }
    dj
}

fn point_velocity(q: &DVector<f64>, v: &DVector<f64>, segs: &Segments) -> Vector2<f64> {
    let jv = point_jacobian(q, segs) * v;
    Vector2::new(jv[0], jv[1])
}

fn link_angle_row(link: usize) -> DMatrix<f64> {
    let mut row = DMatrix::zeros(1, NUM_COORDINATES);
    for &c in RobotModel::angle_coordinates(link) {
        row[(0, c)] = 1.0;
    }
    row
}

/// Mass matrix M(q).
pub fn mass_matrix(model: &RobotModel, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_q(q)?;
    let mut m = DMatrix::zeros(NUM_COORDINATES, NUM_COORDINATES);
    for (k, link) in model.links().iter().enumerate() {
        let j = point_jacobian(q, &model.com_segments(k));
        m += j.transpose() * &j * link.mass;
        let a = link_angle_row(k);
        m += a.transpose() * &a * link.inertia;
    }
    Ok(m)
}

/// ∂M/∂q_i.
pub fn mass_matrix_partial(model: &RobotModel, q: &DVector<f64>, i: usize) -> Result<DMatrix<f64>> {
    check_q(q)?;
    let mut dm = DMatrix::zeros(NUM_COORDINATES, NUM_COORDINATES);
    for (k, link) in model.links().iter().enumerate() {
        let segs = model.com_segments(k);
        let j = point_jacobian(q, &segs);
        let dj = point_jacobian_partial(q, &segs, i);
        let prod = dj.transpose() * &j;
        dm += (&prod + prod.transpose()) * link.mass;
    }
    Ok(dm)
}

/// Gravity vector g(q) = ∂PE/∂q.
pub fn gravity_vector(model: &RobotModel, q: &DVector<f64>) -> Result<DVector<f64>> {
    check_q(q)?;
    let mut g = DVector::zeros(NUM_COORDINATES);
    for (k, link) in model.links().iter().enumerate() {
        let j = point_jacobian(q, &model.com_segments(k));
        g += j.row(1).transpose() * (link.mass * model.gravity());
    }
    Ok(g)
}

/// Combined Coriolis and gravity terms C(q, v) + g(q).
pub fn bias_forces(model: &RobotModel, q: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_v(v)?;
    let mut h = gravity_vector(model, q)?;
    for (k, link) in model.links().iter().enumerate() {
        let segs = model.com_segments(k);
        let j = point_jacobian(q, &segs);
        let a = point_jdot_v(q, v, &segs);
        h += j.transpose() * DVector::from_column_slice(a.as_slice()) * link.mass;
    }
    Ok(h)
}

pub fn kinetic_energy(model: &RobotModel, q: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    check_v(v)?;
    let m = mass_matrix(model, q)?;
    Ok(0.5 * v.dot(&(m * v)))
}

pub fn potential_energy(model: &RobotModel, q: &DVector<f64>) -> Result<f64> {
    check_q(q)?;
    Ok(model
        .links()
        .iter()
        .enumerate()
        .map(|(k, l)| l.mass * model.gravity() * point_position(q, &model.com_segments(k)).y)
        .sum())
}

pub fn center_of_mass(model: &RobotModel, q: &DVector<f64>) -> Result<Vector2<f64>> {
    check_q(q)?;
    let mut c = Vector2::zeros();
    for (k, l) in model.links().iter().enumerate() {
        c += point_position(q, &model.com_segments(k)) * l.mass;
    }
    Ok(c / model.total_mass())
}

/// World position of a link's center of mass.
pub fn link_com_position(model: &RobotModel, q: &DVector<f64>, link: usize) -> Result<Vector2<f64>> {
    check_q(q)?;
    Ok(point_position(q, &model.com_segments(link)))
}

pub fn contact_point_position(model: &RobotModel, q: &DVector<f64>, point: usize) -> Result<Vector2<f64>> {
    check_q(q)?;
    Ok(point_position(q, &model.contact_segments(point)?))
}

pub fn contact_point_velocity(
    model: &RobotModel,
    q: &DVector<f64>,
    v: &DVector<f64>,
    point: usize,
) -> Result<Vector2<f64>> {
    check_q(q)?;
    check_v(v)?;
    Ok(point_velocity(q, v, &model.contact_segments(point)?))
}

/// Jacobian of a single contact point (2 × n).
pub fn contact_point_jacobian(model: &RobotModel, q: &DVector<f64>, point: usize) -> Result<DMatrix<f64>> {
    check_q(q)?;
    Ok(point_jacobian(q, &model.contact_segments(point)?))
}

/// Stacked contact Jacobian J_λ (c × n); rows are (x, z) per point.
pub fn contact_jacobian(model: &RobotModel, q: &DVector<f64>, contacts: &ContactSet) -> Result<DMatrix<f64>> {
    check_q(q)?;
    let mut j = DMatrix::zeros(contacts.dim(), NUM_COORDINATES);
    for (r, &p) in contacts.points().iter().enumerate() {
        let jp = point_jacobian(q, &model.contact_segments(p)?);
        j.rows_mut(2 * r, 2).copy_from(&jp);
    }
    Ok(j)
}

/// ∂J_λ/∂q_i, stacked like [`contact_jacobian`].
pub fn contact_jacobian_partial(
    model: &RobotModel,
    q: &DVector<f64>,
    contacts: &ContactSet,
    i: usize,
) -> Result<DMatrix<f64>> {
    check_q(q)?;
    let mut j = DMatrix::zeros(contacts.dim(), NUM_COORDINATES);
    for (r, &p) in contacts.points().iter().enumerate() {
        let jp = point_jacobian_partial(q, &model.contact_segments(p)?, i);
        j.rows_mut(2 * r, 2).copy_from(&jp);
    }
    Ok(j)
}

/// J̇_λ(q, v) · v.
pub fn contact_jacobian_dot_v(
    model: &RobotModel,
    q: &DVector<f64>,
    v: &DVector<f64>,
    contacts: &ContactSet,
) -> Result<DVector<f64>> {
    check_q(q)?;
    check_v(v)?;
    let mut out = DVector::zeros(contacts.dim());
    for (r, &p) in contacts.points().iter().enumerate() {
        let a = point_jdot_v(q, v, &model.contact_segments(p)?);
        out[2 * r] = a.x;
        out[2 * r + 1] = a.y;
    }
    Ok(out)
}

/// Total angular momentum about a world point (counter-clockwise positive).
pub fn angular_momentum_about_point(model: &RobotModel, state: &RobotState, point: Vector2<f64>) -> Result<f64> {
    check_q(&state.q)?;
    check_v(&state.v)?;
    let mut l = 0.0;
    for (k, link) in model.links().iter().enumerate() {
        let segs = model.com_segments(k);
        let r = point_position(&state.q, &segs) - point;
        let rdot = point_velocity(&state.q, &state.v, &segs);
        l += link.mass * (r.x * rdot.y - r.y * rdot.x) + link.inertia * link_rate(&state.v, k);
    }
    Ok(l)
}
