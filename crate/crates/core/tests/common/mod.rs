//! Shared generators and independent reference computations.
#![allow(dead_code)]

use impact_invariant::dynamics::{contact_jacobian, contact_jacobian_dot_v, mass_matrix};
use impact_invariant::impact::apply_reset_map;
use impact_invariant::linalg;
use impact_invariant::qp::QProblem;
use impact_invariant::{ContactSet, RobotModel, RobotState};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

pub const N: usize = 7;

/// Configurations away from straight-leg singularities, feet anywhere.
pub fn random_q(rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_vec(vec![
        rng.random_range(-1.0..1.0),
        rng.random_range(0.6..0.9),
        rng.random_range(-0.4..0.4),
        rng.random_range(-0.9..0.9),
        rng.random_range(-1.4..-0.15),
        rng.random_range(-0.9..0.9),
        rng.random_range(-1.4..-0.15),
    ])
}

pub fn random_v(rng: &mut impl Rng, scale: f64) -> DVector<f64> {
    DVector::from_fn(N, |_, _| rng.random_range(-scale..scale))
}

pub fn random_state(rng: &mut impl Rng) -> RobotState {
    RobotState::new(random_q(rng), random_v(rng, 2.0), 0.0).unwrap()
}

pub fn arb_state() -> impl Strategy<Value = RobotState> {
    (
        -1.0..1.0f64,
        0.6..0.9f64,
        -0.4..0.4f64,
        -0.9..0.9f64,
        -1.4..-0.15f64,
        -0.9..0.9f64,
        -1.4..-0.15f64,
        proptest::collection::vec(-2.0..2.0f64, N),
    )
        .prop_map(|(x, z, p, lh, lk, rh, rk, v)| {
            RobotState::new(DVector::from_vec(vec![x, z, p, lh, lk, rh, rk]), DVector::from_vec(v), 0.0).unwrap()
        })
}

pub fn contact_sets(model: &RobotModel) -> [ContactSet; 3] {
    let l = model.contact_id("left_foot").unwrap();
    let r = model.contact_id("right_foot").unwrap();
    [ContactSet::single(l), ContactSet::single(r), ContactSet::new(vec![l, r]).unwrap()]
}

/// Rigid impact by a direct LU solve of the full system
/// `[M −Jᵀ; J 0] [v⁺; Λ] = [M v⁻; 0]`.
pub fn reset_by_kkt(model: &RobotModel, state: &RobotState, contacts: &ContactSet) -> (DVector<f64>, DVector<f64>) {
    let m = mass_matrix(model, &state.q).unwrap();
    let j = contact_jacobian(model, &state.q, contacts).unwrap();
    let c = j.nrows();
    let mut k = DMatrix::zeros(N + c, N + c);
    k.view_mut((0, 0), (N, N)).copy_from(&m);
    k.view_mut((0, N), (N, c)).copy_from(&(-j.transpose()));
    k.view_mut((N, 0), (c, N)).copy_from(&j);
    let mut rhs = DVector::zeros(N + c);
    rhs.rows_mut(0, N).copy_from(&(&m * &state.v));
    let sol = k.lu().solve(&rhs).expect("nonsingular KKT matrix");
    (sol.rows(0, N).into_owned(), sol.rows(N, c).into_owned())
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

pub fn rel_err_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / a.amax().max(b.amax()).max(1e-12)
}

/// Finite-difference step for the derivative oracles.
pub const H: f64 = 1e-6;

/// Central-difference Jacobian of the full-state reset map.
pub fn reset_fd(m: &RobotModel, s: &RobotState, set: &ContactSet) -> DMatrix<f64> {
    let f = |q: &nalgebra::DVector<f64>, v: &nalgebra::DVector<f64>| {
        apply_reset_map(m, &RobotState::new(q.clone(), v.clone(), 0.0).unwrap(), set).unwrap().post_velocity
    };
    let mut r = DMatrix::identity(2 * N, 2 * N);
    for i in 0..2 * N {
        let (mut qp, mut vp, mut qm, mut vm) = (s.q.clone(), s.v.clone(), s.q.clone(), s.v.clone());
        if i < N {
            qp[i] += H;
            qm[i] -= H;
        } else {
            vp[i - N] += H;
            vm[i - N] -= H;
        }
        let col = (f(&qp, &vp) - f(&qm, &vm)) / (2.0 * H);
        r.view_mut((N, i), (N, 1)).copy_from(&col);
    }
    r
}

/// Central difference of `J(q + h v)` along `v`, times `v`.
pub fn jdot_v_fd(m: &RobotModel, s: &RobotState, set: &ContactSet) -> DVector<f64> {
    let jp = contact_jacobian(m, &(&s.q + &s.v * H), set).unwrap();
    let jm = contact_jacobian(m, &(&s.q - &s.v * H), set).unwrap();
    (jp - jm) / (2.0 * H) * &s.v
}

pub fn jdot_v_error(m: &RobotModel, s: &RobotState, set: &ContactSet) -> f64 {
    let analytic = contact_jacobian_dot_v(m, &s.q, &s.v, set).unwrap();
    let numeric = jdot_v_fd(m, s, set);
    (&analytic - &numeric).amax() / analytic.amax().max(numeric.amax()).max(1e-12)
}

/// Strictly convex problem with up to 10 variables, 2 equalities and 5
/// inequalities, feasible by construction.
pub fn random_problem(rng: &mut impl Rng) -> QProblem {
    let m = rng.random_range(1..=10);
    let n_eq = rng.random_range(0..=m.min(3) - 1);
    let n_in = rng.random_range(0..=5);
    let mut u = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
    let l = u(m, m);
    let h = &l * l.transpose() + DMatrix::identity(m, m) * 0.1;
    let f = u(m, 1).column(0).into_owned() * 3.0;
    let a_eq = u(n_eq, m);
    let a_in = u(n_in, m);
    let z0 = u(m, 1).column(0).into_owned();
    let b_eq = &a_eq * &z0;
    // some constraints start active at z0, others with slack
    let slack = DVector::from_fn(n_in, |i, _| if i % 2 == 0 { 0.0 } else { 0.5 });
    let b_in = &a_in * &z0 - slack;
    QProblem::new(h, f, a_eq, b_eq, a_in, b_in).unwrap()
}

/// Minimizer found by trying every subset of inequalities as equalities.
pub fn brute_force(p: &QProblem) -> DVector<f64> {
    let m = p.num_vars();
    let n_in = p.a_in.nrows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << n_in) {
        let rows: Vec<usize> = (0..n_in).filter(|i| mask & (1 << i) != 0).collect();
        let k = p.a_eq.nrows() + rows.len();
        let mut a = DMatrix::zeros(k, m);
        let mut b = DVector::zeros(k);
        a.rows_mut(0, p.a_eq.nrows()).copy_from(&p.a_eq);
        b.rows_mut(0, p.a_eq.nrows()).copy_from(&p.b_eq);
        for (r, &i) in rows.iter().enumerate() {
            a.row_mut(p.a_eq.nrows() + r).copy_from(&p.a_in.row(i));
            b[p.a_eq.nrows() + r] = p.b_in[i];
        }
        if k > 0 && linalg::rank(&a, 1e-10) < k {
            continue;
        }
        let mut kkt = DMatrix::zeros(m + k, m + k);
        kkt.view_mut((0, 0), (m, m)).copy_from(&p.h);
        kkt.view_mut((0, m), (m, k)).copy_from(&(-a.transpose()));
        kkt.view_mut((m, 0), (k, m)).copy_from(&a);
        let mut rhs = DVector::zeros(m + k);
        rhs.rows_mut(0, m).copy_from(&(-&p.f));
        rhs.rows_mut(m, k).copy_from(&b);
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let z = sol.rows(0, m).into_owned();
        let mu_ok = (0..rows.len()).all(|r| sol[m + p.a_eq.nrows() + r] >= -1e-9);
        if !mu_ok || !p.is_feasible(&z, 1e-9) {
            continue;
        }
        let obj = p.objective(&z);
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, z));
        }
    }
    best.expect("feasible problem has a KKT point").1
}

