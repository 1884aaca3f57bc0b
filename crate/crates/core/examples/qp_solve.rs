//! A small box-constrained least-squares problem through the dense QP solver.

use impact_invariant::qp::{solve_qp, QProblem};
use nalgebra::{DMatrix, DVector};

fn main() -> impact_invariant::Result<()> {
    // minimize |z - (2, -1, 0.5)|² subject to z0 + z1 + z2 = 1 and -0.5 ≤ z_i ≤ 0.8
    let target = DVector::from_vec(vec![2.0, -1.0, 0.5]);
    let h = DMatrix::identity(3, 3) * 2.0;
    let f = -&target * 2.0;
    let mut a_in = DMatrix::zeros(6, 3);
    let mut b_in = DVector::zeros(6);
    for i in 0..3 {
        a_in[(2 * i, i)] = 1.0;
        b_in[2 * i] = -0.5;
        a_in[(2 * i + 1, i)] = -1.0;
        b_in[2 * i + 1] = -0.8;
    }
    let problem = QProblem::unconstrained(h, f)?
        .with_equalities(DMatrix::from_element(1, 3, 1.0), DVector::from_element(1, 1.0))?
        .with_inequalities(a_in, b_in)?;
    let s = solve_qp(&problem, None);
    println!("status {:?} after {} iterations", s.status, s.iterations);
    println!("z = {:?}", s.z.as_slice());
    println!("equality multiplier {:?}", s.eq_multipliers.as_slice());
    println!("inequality multipliers {:?}", s.ineq_multipliers.as_slice());
    println!("max KKT residual {:.1e}", s.residuals.max());
    Ok(())
}
