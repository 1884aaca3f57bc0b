//! Impact-invariant projection of output velocity errors and the time-based
//! blending schedule used around nominal impacts.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{contact_jacobian, mass_matrix};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, RANK_TOLERANCE};
use crate::model::{ContactSet, RobotModel};

/// Window `[t_switch − T, t_switch + T]` around a nominal impact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionWindow {
    pub t_switch: f64,
    pub half_width: f64,
    pub tau: f64,
}

impl ProjectionWindow {
    pub fn new(t_switch: f64, half_width: f64, tau: f64) -> Result<Self> {
        if !(half_width > 0.0 && tau > 0.0) {
            return Err(Error::InvalidController(format!(
                "projection window needs T > 0 and tau > 0 (got T = {half_width}, tau = {tau})"
            )));
        }
        Ok(Self {
            t_switch,
            half_width,
            tau,
        })
    }

    pub fn start(&self) -> f64 {
        self.t_switch - self.half_width
    }

    pub fn end(&self) -> f64 {
        self.t_switch + self.half_width
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start() && t <= self.end()
    }
}

/// Blending weight `α(t) = 1 − exp(−(t − t_switch + T)/τ)` inside the window,
/// zero outside it.
pub fn blend_alpha(t: f64, window: &ProjectionWindow) -> f64 {
    if !window.contains(t) {
        return 0.0;
    }
    1.0 - (-(t - window.start()) / window.tau).exp()
}

/// Velocity error of one (or several stacked) outputs, with its projection.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputTrackingError {
    pub output: String,
    pub desired_velocity: DVector<f64>,
    pub measured_velocity: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub projected: DVector<f64>,
}

impl OutputTrackingError {
    pub fn new(
        output: impl Into<String>,
        desired_velocity: DVector<f64>,
        jacobian: DMatrix<f64>,
        v: &DVector<f64>,
        correction: &DVector<f64>,
        alpha: f64,
    ) -> Result<Self> {
        let projected = projected_error(&desired_velocity, &jacobian, v, correction, alpha)?;
        Ok(Self {
            output: output.into(),
            measured_velocity: &jacobian * v,
            desired_velocity,
            jacobian,
            projected,
        })
    }

    pub fn raw_error(&self) -> DVector<f64> {
        &self.desired_velocity - &self.measured_velocity
    }
}

/// Correction `q̇_λ = M⁻¹J_λᵀ (J_y M⁻¹J_λᵀ)† (ẏ_des − J_y v)` for explicit `M`
/// and `J_λ`. It is the velocity change reachable by some contact impulse that
/// best explains the output velocity error in the least-squares sense.
pub fn task_space_correction_with(
    mass: &DMatrix<f64>,
    contact_jac: &DMatrix<f64>,
    output_jac: &DMatrix<f64>,
    ydot_des: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = mass.nrows();
    check_dim("contact jacobian columns", n, contact_jac.ncols())?;
    check_dim("output jacobian columns", n, output_jac.ncols())?;
    check_dim("desired output velocity", output_jac.nrows(), ydot_des.len())?;
    check_dim("velocity", n, v.len())?;
    if contact_jac.nrows() == 0 || output_jac.nrows() == 0 {
        return Ok(DVector::zeros(n));
    }
    let a = linalg::solve_spd(mass, &contact_jac.transpose()).ok_or(Error::SingularDynamics)?;
    let ja = output_jac * &a;
    let err = ydot_des - output_jac * v;
    let lambda = linalg::pseudo_inverse(&ja, RANK_TOLERANCE) * err;
    Ok(a * lambda)
}

pub fn task_space_correction(
    model: &RobotModel,
    q: &DVector<f64>,
    v: &DVector<f64>,
    output_jac: &DMatrix<f64>,
    ydot_des: &DVector<f64>,
    contacts: &ContactSet,
) -> Result<DVector<f64>> {
    let m = mass_matrix(model, q)?;
    let j = contact_jacobian(model, q, contacts)?;
    task_space_correction_with(&m, &j, output_jac, ydot_des, v)
}

/// `ẏ_proj = ẏ_des − J_y v − α J_y q̇_λ`.
pub fn projected_error(
    ydot_des: &DVector<f64>,
    output_jac: &DMatrix<f64>,
    v: &DVector<f64>,
    correction: &DVector<f64>,
    alpha: f64,
) -> Result<DVector<f64>> {
    check_dim("desired output velocity", output_jac.nrows(), ydot_des.len())?;
    check_dim("velocity", output_jac.ncols(), v.len())?;
    check_dim("correction", output_jac.ncols(), correction.len())?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidController(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(ydot_des - output_jac * (v + correction * alpha))
}

/// Joint-space projected error `Q (q̇_des − q̇)`.
pub fn joint_projection_error(projector: &DMatrix<f64>, qdot_err: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim("velocity error", projector.ncols(), qdot_err.len())?;
    Ok(projector * qdot_err)
}
