mod common;

use common::*;
use impact_invariant::dynamics::{contact_jacobian, contact_point_jacobian, mass_matrix};
use impact_invariant::impact::invariant_basis;
use impact_invariant::projection::{
    blend_alpha, joint_projection_error, projected_error, task_space_correction, ProjectionWindow,
};
use impact_invariant::RobotModel;
use nalgebra::DVector;
use rand::SeedableRng;
use proptest::prelude::*;

fn impulse_kick(m: &RobotModel, s: &impact_invariant::RobotState, set: &impact_invariant::ContactSet, lam: &[f64]) -> DVector<f64> {
    let mass = mass_matrix(m, &s.q).unwrap();
    let j = contact_jacobian(m, &s.q, set).unwrap();
    let lam = DVector::from_column_slice(&lam[..j.nrows()]);
    mass.lu().solve(&(j.transpose() * lam)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn joint_space_projection_ignores_impulses(
        s in arb_state(),
        vd in proptest::collection::vec(-2.0..2.0f64, N),
        lam in proptest::collection::vec(-50.0..50.0f64, 4),
        which in 0usize..3,
    ) {
        let m = RobotModel::five_link();
        let set = &contact_sets(&m)[which];
        let q_proj = invariant_basis(&m, &s.q, set).unwrap().projector;
        let vd = DVector::from_vec(vd);
        let kicked = &s.v + impulse_kick(&m, &s, set, &lam);
        let e0 = joint_projection_error(&q_proj, &(&vd - &s.v)).unwrap();
        let e1 = joint_projection_error(&q_proj, &(&vd - &kicked)).unwrap();
        prop_assert!((e0 - e1).amax() < 1e-10 * (1.0 + kicked.amax()));
    }

    #[test]
    fn output_projection_ignores_impulses(
        s in arb_state(),
        yd in proptest::collection::vec(-2.0..2.0f64, 2),
        lam in proptest::collection::vec(-50.0..50.0f64, 4),
        which in 0usize..3,
        out_point in 0usize..2,
    ) {
        let m = RobotModel::five_link();
        let set = &contact_sets(&m)[which];
        let jy = contact_point_jacobian(&m, &s.q, out_point).unwrap();
        let yd = DVector::from_vec(yd);
        let kicked = &s.v + impulse_kick(&m, &s, set, &lam);
        let err = |v: &DVector<f64>| {
            let c = task_space_correction(&m, &s.q, v, &jy, &yd, set).unwrap();
            projected_error(&yd, &jy, v, &c, 1.0).unwrap()
        };
        prop_assert!((err(&s.v) - err(&kicked)).amax() < 1e-10 * (1.0 + kicked.amax()));
    }

    #[test]
    fn tracking_a_contact_point_leaves_no_projected_error(
        s in arb_state(),
        yd in proptest::collection::vec(-2.0..2.0f64, 2),
        point in 0usize..2,
    ) {
        let m = RobotModel::five_link();
        let set = impact_invariant::ContactSet::single(point);
        let jy = contact_jacobian(&m, &s.q, &set).unwrap();
        let yd = DVector::from_vec(yd);
        let c = task_space_correction(&m, &s.q, &s.v, &jy, &yd, &set).unwrap();
        prop_assert!(projected_error(&yd, &jy, &s.v, &c, 1.0).unwrap().amax() < 1e-12);
    }

    #[test]
    fn zero_alpha_gives_the_raw_error(
        s in arb_state(),
        yd in proptest::collection::vec(-2.0..2.0f64, 2),
    ) {
        let m = RobotModel::five_link();
        let set = &contact_sets(&m)[0];
        let jy = contact_point_jacobian(&m, &s.q, 1).unwrap();
        let yd = DVector::from_vec(yd);
        let c = task_space_correction(&m, &s.q, &s.v, &jy, &yd, set).unwrap();
        let raw = &yd - &jy * &s.v;
        prop_assert!((projected_error(&yd, &jy, &s.v, &c, 0.0).unwrap() - raw).amax() < 1e-14);
    }

    #[test]
    fn blending_is_monotone_and_bounded(t_switch in 0.1..1.0f64, half in 0.005..0.05f64, tau in 1e-4..0.02f64, a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let w = ProjectionWindow::new(t_switch, half, tau).unwrap();
        let (t0, t1) = (w.start() - 0.01, w.end() + 0.01);
        let (ta, tb) = (t0 + a.min(b) * (t1 - t0), t0 + a.max(b) * (t1 - t0));
        let (xa, xb) = (blend_alpha(ta, &w), blend_alpha(tb, &w));
        prop_assert!((0.0..=1.0).contains(&xa) && (0.0..=1.0).contains(&xb));
        if w.contains(ta) && w.contains(tb) {
            prop_assert!(xa <= xb + 1e-15);
        }
        if !w.contains(ta) {
            prop_assert_eq!(xa, 0.0);
        }
    }
}

#[test]
fn projector_rank_is_n_minus_c() {
    let m = RobotModel::five_link();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let q = random_q(&mut rng);
        for set in contact_sets(&m) {
            let b = invariant_basis(&m, &q, &set).unwrap();
            let rank = impact_invariant::linalg::rank(&b.projector, 1e-8);
            assert_eq!(rank, N - set.dim());
            assert!((&b.projector * &b.projector - &b.projector).amax() < 1e-12);
            assert!((&b.projector - b.projector.transpose()).amax() < 1e-12);
        }
    }
}

