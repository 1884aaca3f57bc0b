//! Rigid no-slip impacts, the impact-invariant subspace, and the mapping of
//! quadratic cost-to-go across an impact.
//!
//! With `A = M⁻¹ J_λᵀ` (the map from contact impulses to velocity changes),
//! a rigid impact produces `v⁺ = v⁻ + A Λ` with `Λ = −(J_λ A)⁻¹ J_λ v⁻`.
//! The impact-invariant subspace is the left nullspace of `A`: any velocity
//! component there is unchanged by every possible impulse `Λ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dynamics::{contact_jacobian, contact_jacobian_partial, mass_matrix, mass_matrix_partial};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, RANK_TOLERANCE};
use crate::model::{ContactSet, RobotModel, RobotState, NUM_COORDINATES};

pub use crate::dynamics::angular_momentum_about_point;

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactResult {
    /// Contact impulse Λ (N·s), ordered like the contact Jacobian rows.
    pub impulse: DVector<f64>,
    pub post_velocity: DVector<f64>,
    /// Kinetic energy lost in the impact (J).
    pub energy_dissipated: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantBasis {
    /// (n − c) × n, orthonormal rows.
    pub basis: DMatrix<f64>,
    /// n × n orthogonal projector `PᵀP` onto the invariant subspace.
    pub projector: DMatrix<f64>,
    pub configuration: DVector<f64>,
    pub contacts: ContactSet,
}

impl InvariantBasis {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.projector * v
    }
}

/// Quadratic cost-to-go `x̃ᵀ S x̃` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostToGo {
    pub s: DMatrix<f64>,
    pub t: f64,
}

impl CostToGo {
    pub fn new(s: DMatrix<f64>, t: f64) -> Result<Self> {
        check_dim("cost-to-go columns", s.nrows(), s.ncols())?;
        let sym = linalg::symmetrize(&s);
        let scale = linalg::max_abs(&sym).max(1.0);
        if linalg::max_abs(&(&s - &sym)) > 1e-10 * scale {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: f64::NAN });
        }
        let min_eig = min_eigenvalue(&sym);
        if min_eig < -1e-10 * scale {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min_eig });
        }
        Ok(Self { s: sym, t })
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.s)
    }
}

fn min_eigenvalue(s: &DMatrix<f64>) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(s.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Constraint rows of `jac` that are linearly dependent on earlier rows in the
/// `M⁻¹` metric.
fn redundant_rows(mass: &DMatrix<f64>, jac: &DMatrix<f64>) -> Vec<usize> {
    let Some(chol) = mass.clone().cholesky() else {
        return (0..jac.nrows()).collect();
    };
    // rows of J L⁻ᵀ
    let b = chol.l().solve_lower_triangular(&jac.transpose()).expect("triangular solve");
    let rows: Vec<DVector<f64>> = b.column_iter().map(|c| c.into_owned()).collect();
    let scale = rows.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut redundant = Vec::new();
    for (i, r) in rows.into_iter().enumerate() {
        let mut res = r.clone();
        for e in &basis {
            res -= e * e.dot(&res);
        }
        let n = res.norm();
        if n <= RANK_TOLERANCE * scale || scale == 0.0 {
            redundant.push(i);
        } else {
            basis.push(res / n);
        }
    }
    redundant
}

fn impulse_map(mass: &DMatrix<f64>, jac: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    linalg::solve_spd(mass, &jac.transpose()).ok_or(Error::SingularDynamics)
}

fn contact_gram(mass: &DMatrix<f64>, jac: &DMatrix<f64>) -> Result<(DMatrix<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>)> {
    let a = impulse_map(mass, jac)?;
    let redundant = redundant_rows(mass, jac);
    if !redundant.is_empty() {
        return Err(Error::SingularContactGram { rows: redundant });
    }
    let gram = linalg::symmetrize(&(jac * &a));
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::SingularContactGram { rows: (0..jac.nrows()).collect() })?;
    Ok((a, chol))
}

/// Contact impulse `Λ = −(J M⁻¹ Jᵀ)⁻¹ J v⁻` for explicit `M` and `J`.
pub fn solve_impulse_with(mass: &DMatrix<f64>, jac: &DMatrix<f64>, v_minus: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim("mass matrix columns", mass.nrows(), mass.ncols())?;
    check_dim("jacobian columns", mass.nrows(), jac.ncols())?;
    check_dim("pre-impact velocity", mass.nrows(), v_minus.len())?;
    if jac.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let (_, chol) = contact_gram(mass, jac)?;
    Ok(-chol.solve(&(jac * v_minus)))
}

/// Velocity reset projector `I − M⁻¹Jᵀ(JM⁻¹Jᵀ)⁻¹J`.
pub fn reset_projector(mass: &DMatrix<f64>, jac: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_dim("jacobian columns", mass.nrows(), jac.ncols())?;
    let n = mass.nrows();
    if jac.nrows() == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    let (a, chol) = contact_gram(mass, jac)?;
    Ok(DMatrix::identity(n, n) - a * chol.solve(jac))
}

pub fn solve_impulse(model: &RobotModel, q: &DVector<f64>, v_minus: &DVector<f64>, contacts: &ContactSet) -> Result<DVector<f64>> {
    let m = mass_matrix(model, q)?;
    let j = contact_jacobian(model, q, contacts)?;
    solve_impulse_with(&m, &j, v_minus)
}

/// Reset for explicit `M` and `J`.
pub fn apply_reset_with(mass: &DMatrix<f64>, jac: &DMatrix<f64>, v_minus: &DVector<f64>) -> Result<ImpactResult> {
    let impulse = solve_impulse_with(mass, jac, v_minus)?;
    let post_velocity = if impulse.is_empty() {
        v_minus.clone()
    } else {
        v_minus + impulse_map(mass, jac)? * &impulse
    };
    let ke = |v: &DVector<f64>| 0.5 * v.dot(&(mass * v));
    Ok(ImpactResult {
        energy_dissipated: ke(v_minus) - ke(&post_velocity),
        impulse,
        post_velocity,
    })
}

/// Rigid no-slip reset: q unchanged, `v⁺ = (I − M⁻¹Jᵀ(JM⁻¹Jᵀ)⁻¹J) v⁻`.
pub fn apply_reset_map(model: &RobotModel, state: &RobotState, contacts: &ContactSet) -> Result<ImpactResult> {
    let m = mass_matrix(model, &state.q)?;
    let j = contact_jacobian(model, &state.q, contacts)?;
    apply_reset_with(&m, &j, &state.v)
}

/// Orthonormal basis of the impact-invariant subspace for explicit `M`, `J`.
pub fn invariant_basis_with(mass: &DMatrix<f64>, jac: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_dim("jacobian columns", mass.nrows(), jac.ncols())?;
    let n = mass.nrows();
    if jac.nrows() == 0 {
        return Ok((DMatrix::identity(n, n), DMatrix::identity(n, n)));
    }
    let a = impulse_map(mass, jac)?;
    let range = linalg::range_basis(&a, RANK_TOLERANCE);
    if range.ncols() < jac.nrows() {
        return Err(Error::RankDeficient { rank: range.ncols(), rows: jac.nrows() });
    }
    let p = linalg::orthonormal_complement_rows(&range);
    let q = p.transpose() * &p;
    Ok((p, linalg::symmetrize(&q)))
}

pub fn invariant_basis(model: &RobotModel, q: &DVector<f64>, contacts: &ContactSet) -> Result<InvariantBasis> {
    let m = mass_matrix(model, q)?;
    let j = contact_jacobian(model, q, contacts)?;
    let (basis, projector) = invariant_basis_with(&m, &j)?;
    Ok(InvariantBasis {
        basis,
        projector,
        configuration: q.clone(),
        contacts: contacts.clone(),
    })
}

/// Jacobian of the full-state reset `(q, v) ↦ (q, v⁺(q, v))`, 2n × 2n.
///
/// The q-dependence is differentiated analytically through `M(q)` and `J(q)`.
pub fn linearize_reset_map(model: &RobotModel, state: &RobotState, contacts: &ContactSet) -> Result<DMatrix<f64>> {
    let n = NUM_COORDINATES;
    let mut r = DMatrix::identity(2 * n, 2 * n);
    if contacts.is_empty() {
        return Ok(r);
    }
    let q = &state.q;
    let v = &state.v;
    let m = mass_matrix(model, q)?;
    let j = contact_jacobian(model, q, contacts)?;
    let (a, chol) = contact_gram(&m, &j)?;
    let m_chol = m.clone().cholesky().ok_or(Error::SingularDynamics)?;
    let lambda = -chol.solve(&(&j * v));
    let projector = DMatrix::identity(n, n) - &a * chol.solve(&j);
    r.view_mut((n, n), (n, n)).copy_from(&projector);
    r.view_mut((n, 0), (n, n)).fill(0.0);
    for i in 0..n {
        let dm = mass_matrix_partial(model, q, i)?;
        let dj = contact_jacobian_partial(model, q, contacts, i)?;
        // d(M⁻¹Jᵀ) = −M⁻¹ dM M⁻¹Jᵀ + M⁻¹ dJᵀ
        let da = m_chol.solve(&(dj.transpose() - &dm * &a));
        let dg = &dj * &a + &j * &da;
        let dlambda = -chol.solve(&(&dg * &lambda + &dj * v));
        let dv = &da * &lambda + &a * dlambda;
        r.view_mut((n, i), (n, 1)).copy_from(&dv);
    }
    Ok(r)
}

/// `S⁻ = R̂ᵀ S⁺ R̂`, symmetrized.
pub fn map_cost_to_go(s_plus: &CostToGo, r_hat: &DMatrix<f64>) -> Result<CostToGo> {
    check_dim("reset linearization rows", s_plus.s.nrows(), r_hat.nrows())?;
    check_dim("reset linearization columns", s_plus.s.ncols(), r_hat.ncols())?;
    let s = r_hat.transpose() * &s_plus.s * r_hat;
    Ok(CostToGo {
        s: linalg::symmetrize(&s),
        t: s_plus.t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{contact_point_position, kinetic_energy};

    fn point_mass() -> (DMatrix<f64>, DMatrix<f64>) {
        (DMatrix::identity(2, 2), DMatrix::identity(2, 2))
    }

    #[test]
    fn point_mass_impulse_and_reset() {
        let (m, j) = point_mass();
        let v = DVector::from_vec(vec![0.3, -1.0]);
        let lam = solve_impulse_with(&m, &j, &v).unwrap();
        // 2x2 linear solve oracle: (J M⁻¹ Jᵀ) Λ = −J v
        let oracle = (&j * m.clone().try_inverse().unwrap() * j.transpose())
            .lu()
            .solve(&(-(&j * &v)))
            .unwrap();
        assert!((&lam - &oracle).amax() < 1e-15);
        assert!((lam[0] + 0.3).abs() < 1e-15 && (lam[1] - 1.0).abs() < 1e-15);
        let res = apply_reset_with(&m, &j, &v).unwrap();
        assert!(res.post_velocity.amax() < 1e-15);
        assert!((res.energy_dissipated - 0.5 * (0.09 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_impulse_cases() {
        let (m, j) = point_mass();
        assert_eq!(solve_impulse_with(&m, &j, &DVector::zeros(2)).unwrap(), DVector::zeros(2));
        let j_row = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let v = DVector::from_vec(vec![0.5, 0.0]);
        assert!(solve_impulse_with(&m, &j_row, &v).unwrap().amax() == 0.0);
    }

    #[test]
    fn redundant_rows_are_reported() {
        let m = DMatrix::identity(3, 3);
        let j = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 2.0, -1.0, 0.0]);
        match solve_impulse_with(&m, &j, &DVector::from_vec(vec![1.0, 1.0, 1.0])) {
            Err(Error::SingularContactGram { rows }) => assert_eq!(rows, vec![2]),
            other => panic!("expected singular gram, got {other:?}"),
        }
    }

    #[test]
    fn duplicated_contact_point_is_rejected() {
        let base = RobotModel::five_link();
        let mut contacts = base.contacts().to_vec();
        let mut dup = contacts[0].clone();
        dup.name = "left_foot_copy".into();
        contacts.push(dup);
        let model = RobotModel::new(base.links().to_vec(), base.actuated_coordinates().to_vec(), contacts, 9.81, 0.8, 150.0).unwrap();
        let q = DVector::from_vec(vec![0.0, 0.8, 0.0, 0.1, -0.2, -0.1, -0.2]);
        let both = ContactSet::new(vec![0, 2]).unwrap();
        let state = RobotState::new(q.clone(), DVector::from_element(7, 0.1), 0.0).unwrap();
        match apply_reset_map(&model, &state, &both) {
            Err(Error::SingularContactGram { rows }) => assert_eq!(rows, vec![2, 3]),
            other => panic!("expected singular gram, got {other:?}"),
        }
        assert!(matches!(
            invariant_basis(&model, &q, &both),
            Err(Error::RankDeficient { rank: 2, rows: 4 })
        ));
    }

    #[test]
    fn five_link_single_foot_reset() {
        let model = RobotModel::five_link();
        let q = DVector::from_vec(vec![0.1, 0.75, 0.05, 0.3, -0.4, -0.2, -0.3]);
        let v = DVector::from_vec(vec![0.5, -0.2, 0.3, 1.0, -2.0, 0.5, 1.5]);
        let state = RobotState::new(q.clone(), v.clone(), 0.0).unwrap();
        let contacts = ContactSet::single(1);
        let res = apply_reset_map(&model, &state, &contacts).unwrap();
        let j = contact_jacobian(&model, &q, &contacts).unwrap();
        assert!((&j * &res.post_velocity).amax() < 1e-10);
        assert!(kinetic_energy(&model, &q, &res.post_velocity).unwrap() <= kinetic_energy(&model, &q, &v).unwrap());
        // idempotent
        let again = apply_reset_map(&model, &RobotState::new(q.clone(), res.post_velocity.clone(), 0.0).unwrap(), &contacts).unwrap();
        assert!((&again.post_velocity - &res.post_velocity).amax() < 1e-12);
        // angular momentum about the impact point
        let foot = contact_point_position(&model, &q, 1).unwrap();
        let l_pre = angular_momentum_about_point(&model, &state, foot).unwrap();
        let l_post = angular_momentum_about_point(&model, &RobotState::new(q, res.post_velocity, 0.0).unwrap(), foot).unwrap();
        assert!((l_pre - l_post).abs() <= 1e-8 * l_pre.abs().max(1e-12));
    }

    #[test]
    fn invariant_basis_shapes() {
        let model = RobotModel::five_link();
        let q = DVector::from_vec(vec![0.1, 0.75, 0.05, 0.3, -0.4, -0.2, -0.3]);
        let empty = invariant_basis(&model, &q, &ContactSet::empty()).unwrap();
        assert_eq!(empty.basis, DMatrix::identity(7, 7));
        assert_eq!(empty.projector, DMatrix::identity(7, 7));
        let one = invariant_basis(&model, &q, &ContactSet::single(0)).unwrap();
        assert_eq!(one.basis.shape(), (5, 7));
        let q2 = &one.projector * &one.projector;
        assert!((&q2 - &one.projector).amax() < 1e-10);
        assert!((&one.projector - one.projector.transpose()).amax() < 1e-12);
    }

    #[test]
    fn linearization_trivial_cases() {
        let model = RobotModel::five_link();
        let q = DVector::from_vec(vec![0.1, 0.75, 0.05, 0.3, -0.4, -0.2, -0.3]);
        let state = RobotState::new(q, DVector::from_element(7, 0.3), 0.0).unwrap();
        let r = linearize_reset_map(&model, &state, &ContactSet::empty()).unwrap();
        assert_eq!(r, DMatrix::identity(14, 14));
        let (m, j) = point_mass();
        assert!(reset_projector(&m, &j).unwrap().amax() < 1e-15);
    }

    #[test]
    fn cost_to_go_mapping() {
        let s = CostToGo::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]), 0.5).unwrap();
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let mapped = map_cost_to_go(&s, &r).unwrap();
        assert_eq!(mapped.s, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 3.0]));
        let same = map_cost_to_go(&s, &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(same.s, s.s);
        let zero = CostToGo::new(DMatrix::zeros(2, 2), 0.0).unwrap();
        assert_eq!(map_cost_to_go(&zero, &r).unwrap().s, DMatrix::zeros(2, 2));
        assert!(map_cost_to_go(&s, &DMatrix::identity(3, 3)).is_err());
        assert!(CostToGo::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), 0.0).is_err());
    }
}
