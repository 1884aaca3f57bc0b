//! Dense convex quadratic programming.
//!
//! ```text
//!     minimize     ½ zᵀ H z + fᵀ z
//!     subject to   A_eq z  = b_eq
//!                  A_in z ≥ b_in
//! ```
//!
//! Solved with the dual active-set method of Goldfarb and Idnani. The working
//! set factorization is rebuilt from scratch every iteration, which is cheap at
//! the sizes used by the operational space controller (tens of variables).
//! Positive semidefinite Hessians are handled with a proximal-point outer loop
//! around strictly convex subproblems.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct QProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
}

impl QProblem {
    /// Builds a problem; `h` is symmetrized.
    pub fn new(
        h: DMatrix<f64>,
        f: DVector<f64>,
        a_eq: DMatrix<f64>,
        b_eq: DVector<f64>,
        a_in: DMatrix<f64>,
        b_in: DVector<f64>,
    ) -> Result<Self> {
        let m = f.len();
        check_dim("hessian rows", m, h.nrows())?;
        check_dim("hessian columns", m, h.ncols())?;
        check_dim("equality columns", m, a_eq.ncols())?;
        check_dim("equality rhs", a_eq.nrows(), b_eq.len())?;
        check_dim("inequality columns", m, a_in.ncols())?;
        check_dim("inequality rhs", a_in.nrows(), b_in.len())?;
        Ok(Self {
            h: linalg::symmetrize(&h),
            f,
            a_eq,
            b_eq,
            a_in,
            b_in,
        })
    }

    /// Unconstrained problem; add constraints with the builder methods.
    pub fn unconstrained(h: DMatrix<f64>, f: DVector<f64>) -> Result<Self> {
        let m = f.len();
        Self::new(
            h,
            f,
            DMatrix::zeros(0, m),
            DVector::zeros(0),
            DMatrix::zeros(0, m),
            DVector::zeros(0),
        )
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_dim("equality columns", self.num_vars(), a.ncols())?;
        check_dim("equality rhs", a.nrows(), b.len())?;
        self.a_eq = a;
        self.b_eq = b;
        Ok(self)
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_dim("inequality columns", self.num_vars(), a.ncols())?;
        check_dim("inequality rhs", a.nrows(), b.len())?;
        self.a_in = a;
        self.b_in = b;
        Ok(self)
    }

    pub fn num_vars(&self) -> usize {
        self.f.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.h * z)) + self.f.dot(z)
    }

    pub fn is_feasible(&self, z: &DVector<f64>, tol: f64) -> bool {
        let eq = &self.a_eq * z - &self.b_eq;
        let ineq = &self.a_in * z - &self.b_in;
        eq.iter().all(|r| r.abs() <= tol) && ineq.iter().all(|&r| r >= -tol)
    }

    /// KKT residuals for a primal-dual pair, with multipliers following
    /// `H z + f = A_eqᵀ y + A_inᵀ μ`, `μ ≥ 0`.
    pub fn kkt_residuals(&self, z: &DVector<f64>, y: &DVector<f64>, mu: &DVector<f64>) -> KktResiduals {
        let grad = &self.h * z + &self.f - self.a_eq.transpose() * y - self.a_in.transpose() * mu;
        let eq = &self.a_eq * z - &self.b_eq;
        let slack = &self.a_in * z - &self.b_in;
        KktResiduals {
            stationarity: linalg::max_abs_vec(&grad),
            primal_equality: linalg::max_abs_vec(&eq),
            primal_inequality: slack.iter().fold(0.0, |m, &s| m.max(-s)),
            dual: mu.iter().fold(0.0, |m, &x| m.max(-x)),
            complementarity: slack.iter().zip(mu.iter()).fold(0.0, |m, (s, x)| m.max((s * x).abs())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_equality: f64,
    pub primal_inequality: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_equality)
            .max(self.primal_inequality)
            .max(self.dual)
            .max(self.complementarity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QSolution {
    pub z: DVector<f64>,
    pub eq_multipliers: DVector<f64>,
    pub ineq_multipliers: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub residuals: KktResiduals,
    /// Equality rows dropped as linearly dependent on earlier rows.
    pub pruned_equalities: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub tolerance: f64,
    pub max_iter: usize,
    /// Proximal weight relative to the Hessian scale, used when H is singular.
    pub proximal_weight: f64,
    pub max_proximal_rounds: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iter: 200,
            proximal_weight: 1e-6,
            max_proximal_rounds: 500,
        }
    }
}

/// Solves with default settings.
pub fn solve_qp(problem: &QProblem, warm_start: Option<&DVector<f64>>) -> QSolution {
    QpSolver::new(QpSettings::default()).solve(problem, warm_start)
}

#[derive(Debug, Clone, Default)]
pub struct QpSolver {
    pub settings: QpSettings,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Row {
    Eq(usize),
    Ineq(usize),
}

struct Active {
    row: Row,
    normal: DVector<f64>,
    /// +1 or −1 when an equality normal was flipped
    sign: f64,
    multiplier: f64,
}

struct Inner {
    z: DVector<f64>,
    active: Vec<Active>,
    status: QpStatus,
    iterations: usize,
    pruned: Vec<usize>,
}

impl QpSolver {
    pub fn new(settings: QpSettings) -> Self {
        Self { settings }
    }

    pub fn solve(&self, problem: &QProblem, warm_start: Option<&DVector<f64>>) -> QSolution {
        let m = problem.num_vars();
        let preferred: Vec<usize> = match warm_start {
            Some(ws) if ws.len() == m => {
                let slack = &problem.a_in * ws - &problem.b_in;
                slack
                    .iter()
                    .enumerate()
                    .filter(|(i, s)| s.abs() <= 1e-6 * (1.0 + problem.b_in[*i].abs()))
                    .map(|(i, _)| i)
                    .collect()
            }
            _ => Vec::new(),
        };

        let scale = linalg::max_abs(&problem.h).max(1e-300);
        let strictly_convex = problem
            .h
            .clone()
            .cholesky()
            .map(|c| {
                let d = c.l_dirty().diagonal();
                let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
                min * min > 1e-12 * scale
            })
            .unwrap_or(false);

        let (inner, total_iters) = if strictly_convex {
            let inner = self.dual_active_set(&problem.h, &problem.f, problem, &preferred);
            let it = inner.iterations;
            (inner, it)
        } else {
            let rho = self.settings.proximal_weight * scale.max(1.0);
            let h_reg = &problem.h + DMatrix::identity(m, m) * rho;
            let mut center = match warm_start {
                Some(ws) if ws.len() == m => ws.clone(),
                _ => DVector::zeros(m),
            };
            let mut total = 0;
            let mut last = None;
            for _ in 0..self.settings.max_proximal_rounds {
                let f = &problem.f - &center * rho;
                let inner = self.dual_active_set(&h_reg, &f, problem, &preferred);
                total += inner.iterations;
                if inner.status != QpStatus::Optimal {
                    last = Some(inner);
                    break;
                }
                let step = (&inner.z - &center).amax();
                center = inner.z.clone();
                let done = step <= 1e-13 * (1.0 + center.amax());
                last = Some(inner);
                if done || total > self.settings.max_iter {
                    break;
                }
            }
            let mut inner = last.expect("at least one proximal round");
            if inner.status == QpStatus::Optimal && total > self.settings.max_iter {
                inner.status = QpStatus::MaxIter;
            }
            (inner, total)
        };

        let mut y = DVector::zeros(problem.a_eq.nrows());
        let mut mu = DVector::zeros(problem.a_in.nrows());
        for a in &inner.active {
            match a.row {
                Row::Eq(i) => y[i] = a.sign * a.multiplier,
                Row::Ineq(i) => mu[i] = a.multiplier,
            }
        }
        let residuals = problem.kkt_residuals(&inner.z, &y, &mu);
        QSolution {
            z: inner.z,
            eq_multipliers: y,
            ineq_multipliers: mu,
            status: inner.status,
            iterations: total_iters,
            residuals,
            pruned_equalities: inner.pruned,
        }
    }

    /// Goldfarb–Idnani on `½zᵀGz + fᵀz` with the constraints of `problem`.
    fn dual_active_set(&self, g: &DMatrix<f64>, f: &DVector<f64>, problem: &QProblem, preferred: &[usize]) -> Inner {
        let m = f.len();
        let chol = match g.clone().cholesky() {
            Some(c) => c,
            None => {
                return Inner {
                    z: DVector::zeros(m),
                    active: Vec::new(),
                    status: QpStatus::Infeasible,
                    iterations: 0,
                    pruned: Vec::new(),
                }
            }
        };
        // J = L⁻ᵀ so that G⁻¹ = J Jᵀ
        let j_mat = chol
            .l()
            .transpose()
            .solve_upper_triangular(&DMatrix::identity(m, m))
            .expect("nonsingular cholesky factor");
        let mut z = -chol.solve(f);
        let mut active: Vec<Active> = Vec::new();
        let mut pruned = Vec::new();
        let mut iterations = 0;
        let feas_tol = 1e-12;

        let finish = |z, active, status, iterations, pruned| Inner {
            z,
            active,
            status,
            iterations,
            pruned,
        };

        // equalities first
        for i in 0..problem.a_eq.nrows() {
            iterations += 1;
            let mut normal = problem.a_eq.row(i).transpose();
            let mut rhs = problem.b_eq[i];
            let mut sign = 1.0;
            let mut s = normal.dot(&z) - rhs;
            if s > 0.0 {
                normal = -normal;
                rhs = -rhs;
                sign = -1.0;
                s = -s;
            }
            let (step, dual) = match directions(&j_mat, &active, &normal) {
                Some(d) => d,
                None => {
                    if s.abs() <= 1e-9 * (1.0 + rhs.abs()) {
                        pruned.push(i);
                        continue;
                    }
                    return finish(z, active, QpStatus::Infeasible, iterations, pruned);
                }
            };
            let t = -s / step.dot(&normal);
            z += &step * t;
            for (a, r) in active.iter_mut().zip(dual.iter()) {
                a.multiplier -= t * r;
            }
            active.push(Active {
                row: Row::Eq(i),
                normal,
                sign,
                multiplier: t,
            });
        }

        loop {
            // pick the most violated inequality, preferring the warm-start set
            let slack = &problem.a_in * &z - &problem.b_in;
            let is_active = |i: usize, act: &[Active]| act.iter().any(|a| a.row == Row::Ineq(i));
            let violated = |i: usize| slack[i] < -feas_tol * (1.0 + problem.b_in[i].abs());
            let pick = |cands: &mut dyn Iterator<Item = usize>| {
                cands
                    .filter(|&i| !is_active(i, &active) && violated(i))
                    .min_by(|&a, &b| slack[a].total_cmp(&slack[b]))
            };
            let p = pick(&mut preferred.iter().copied()).or_else(|| pick(&mut (0..problem.a_in.nrows())));
            let Some(p) = p else {
                return finish(z, active, QpStatus::Optimal, iterations, pruned);
            };
            let normal = problem.a_in.row(p).transpose();
            let rhs = problem.b_in[p];
            let mut u_p = 0.0;
            loop {
                iterations += 1;
                if iterations > self.settings.max_iter {
                    return finish(z, active, QpStatus::MaxIter, iterations, pruned);
                }
                let s_p = normal.dot(&z) - rhs;
                let (step, dual) = match directions(&j_mat, &active, &normal) {
                    Some((step, dual)) => (Some(step), dual),
                    None => (None, dependent_dual(&j_mat, &active, &normal)),
                };
                // dual step length limited by active inequality multipliers
                let mut t1 = f64::INFINITY;
                let mut drop = None;
                for (k, (a, &r)) in active.iter().zip(dual.iter()).enumerate() {
                    if matches!(a.row, Row::Ineq(_)) && r > 0.0 {
                        let t = a.multiplier / r;
                        if t < t1 {
                            t1 = t;
                            drop = Some(k);
                        }
                    }
                }
                let t2 = match &step {
                    Some(st) => {
                        let curv = st.dot(&normal);
                        if curv > 0.0 {
                            -s_p / curv
                        } else {
                            f64::INFINITY
                        }
                    }
                    None => f64::INFINITY,
                };
                let t = t1.min(t2);
                if !t.is_finite() {
                    return finish(z, active, QpStatus::Infeasible, iterations, pruned);
                }
                if let Some(st) = &step {
                    if t2.is_finite() {
                        z += st * t;
                    }
                }
                for (a, r) in active.iter_mut().zip(dual.iter()) {
                    a.multiplier -= t * r;
                }
                u_p += t;
                if t2 <= t1 {
                    active.push(Active {
                        row: Row::Ineq(p),
                        normal: normal.clone(),
                        sign: 1.0,
                        multiplier: u_p,
                    });
                    break;
                }
                active.remove(drop.expect("finite t1 has a blocking constraint"));
            }
        }
    }
}

/// Primal step `z = J Q₂ Q₂ᵀ Jᵀ n` and dual step `r = R⁻¹ Q₁ᵀ Jᵀ n` for adding
/// constraint normal `n` to the working set. `None` when `n` is dependent on
/// the working set normals.
fn directions(j_mat: &DMatrix<f64>, active: &[Active], normal: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let d = j_mat.transpose() * normal;
    if active.is_empty() {
        let dn = d.norm();
        if dn == 0.0 {
            return None;
        }
        return Some((j_mat * &d, DVector::zeros(0)));
    }
    let (q1, r) = working_qr(j_mat, active);
    let proj = q1.transpose() * &d;
    let resid = &d - &q1 * &proj;
    if resid.norm() <= 1e-10 * d.norm().max(1e-300) {
        return None;
    }
    let dual = r.solve_upper_triangular(&proj).unwrap_or_else(|| DVector::zeros(active.len()));
    Some((j_mat * resid, dual))
}

fn dependent_dual(j_mat: &DMatrix<f64>, active: &[Active], normal: &DVector<f64>) -> DVector<f64> {
    if active.is_empty() {
        return DVector::zeros(0);
    }
    let d = j_mat.transpose() * normal;
    let (q1, r) = working_qr(j_mat, active);
    r.solve_upper_triangular(&(q1.transpose() * d))
        .unwrap_or_else(|| DVector::zeros(active.len()))
}

fn working_qr(j_mat: &DMatrix<f64>, active: &[Active]) -> (DMatrix<f64>, DMatrix<f64>) {
    let cols: Vec<DVector<f64>> = active.iter().map(|a| a.normal.clone()).collect();
    let n_mat = DMatrix::from_columns(&cols);
    let b = j_mat.transpose() * n_mat;
    let qr = b.qr();
    (qr.q(), qr.r())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(h: f64, f: f64) -> QProblem {
        QProblem::unconstrained(DMatrix::from_element(1, 1, h), DVector::from_element(1, f)).unwrap()
    }

    #[test]
    fn bound_constrained_scalar() {
        let p = scalar(1.0, 0.0)
            .with_inequalities(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 1.0))
            .unwrap();
        let s = solve_qp(&p, None);
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.z[0] - 1.0).abs() < 1e-12);
        assert!((s.ineq_multipliers[0] - 1.0).abs() < 1e-12);
        assert!(s.residuals.max() < 1e-10);
    }

    #[test]
    fn equality_by_symmetry() {
        let p = QProblem::unconstrained(DMatrix::identity(2, 2), DVector::zeros(2))
            .unwrap()
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 2.0))
            .unwrap();
        let s = solve_qp(&p, None);
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.z[0] - 1.0).abs() < 1e-12 && (s.z[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_bounds() {
        // z ≥ 1 and −z ≥ 0
        let p = scalar(1.0, 0.0)
            .with_inequalities(DMatrix::from_column_slice(2, 1, &[1.0, -1.0]), DVector::from_vec(vec![1.0, 0.0]))
            .unwrap();
        assert_eq!(solve_qp(&p, None).status, QpStatus::Infeasible);
    }

    #[test]
    fn dependent_equalities_pruned() {
        let p = QProblem::unconstrained(DMatrix::identity(2, 2), DVector::zeros(2))
            .unwrap()
            .with_equalities(
                DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]),
                DVector::from_vec(vec![2.0, 4.0]),
            )
            .unwrap();
        let s = solve_qp(&p, None);
        assert_eq!(s.status, QpStatus::Optimal);
        assert_eq!(s.pruned_equalities, vec![1]);
        assert!((s.z[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_equalities_infeasible() {
        let p = QProblem::unconstrained(DMatrix::identity(2, 2), DVector::zeros(2))
            .unwrap()
            .with_equalities(
                DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]),
                DVector::from_vec(vec![2.0, 3.0]),
            )
            .unwrap();
        assert_eq!(solve_qp(&p, None).status, QpStatus::Infeasible);
    }

    #[test]
    fn singular_hessian_with_constraints() {
        // min z0² s.t. z0 + z1 = 1, z1 ≤ 3, z1 ≥ −3: optimum z0 = 0 not unique in z1? no: z1 = 1
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let p = QProblem::unconstrained(h, DVector::zeros(2))
            .unwrap()
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 1.0))
            .unwrap()
            .with_inequalities(
                DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 0.0, 1.0]),
                DVector::from_vec(vec![-3.0, -3.0]),
            )
            .unwrap();
        let s = solve_qp(&p, None);
        assert_eq!(s.status, QpStatus::Optimal);
        assert!(s.z[0].abs() < 1e-9 && (s.z[1] - 1.0).abs() < 1e-9);
        assert!(s.residuals.max() < 1e-8, "{:?}", s.residuals);
    }

    #[test]
    fn degenerate_linear_direction_bounded_by_inequalities() {
        // min −z1 + z0² with 0 ≤ z1 ≤ 2
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let p = QProblem::unconstrained(h, DVector::from_vec(vec![0.0, -1.0]))
            .unwrap()
            .with_inequalities(
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -1.0]),
                DVector::from_vec(vec![0.0, -2.0]),
            )
            .unwrap();
        let s = solve_qp(&p, None);
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.z[1] - 2.0).abs() < 1e-9, "{}", s.z);
        assert!((s.ineq_multipliers[1] - 1.0).abs() < 1e-6);
    }
}
