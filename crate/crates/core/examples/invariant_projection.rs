//! The impact-invariant subspace of a landing foot and what it filters out.

use impact_invariant::dynamics::{contact_jacobian, mass_matrix};
use impact_invariant::impact::invariant_basis;
use impact_invariant::projection::{projected_error, task_space_correction};
use impact_invariant::trajectory::{generate_walking_gait, Side};
use impact_invariant::{ContactSet, RobotModel};
use nalgebra::{DMatrix, DVector};

fn main() -> impact_invariant::Result<()> {
    let model = RobotModel::five_link();
    let gait = generate_walking_gait(&model, 0.3, 0.7, 0.08)?;
    let (q, v, _) = gait.eval_coordinates(0.34, Side::Post)?;
    let right = ContactSet::single(model.contact_id("right_foot")?);

    let basis = invariant_basis(&model, &q, &right)?;
    println!("{} coordinates, {} contact rows, invariant dimension {}", q.len(), right.dim(), basis.dim());

    // any impulse moves v only along M⁻¹Jᵀ, which the projector removes
    let j = contact_jacobian(&model, &q, &right)?;
    let kick = mass_matrix(&model, &q)?.lu().solve(&(j.transpose() * DVector::from_vec(vec![2.0, 25.0]))).unwrap();
    println!("|Q Δv| = {:.2e} for |Δv| = {:.3}", basis.project(&kick).amax(), kick.amax());

    // the reference also differs by a smooth hip and pitch offset
    let offset = DVector::from_fn(7, |i, _| [0.0, 0.0, 0.2, 0.3, 0.0, 0.0, 0.0][i]);
    let desired_v = &v + &offset;
    let measured = &v + &kick;
    let pitch = DMatrix::from_fn(1, 7, |_, c| f64::from(c == 2));

    // projected one output at a time, a single row is always explained by
    // some impulse, so both outputs lose their whole error
    for (name, jy) in [("torso pitch", pitch.clone()), ("right foot", j.clone())] {
        let desired = &jy * &desired_v;
        let c = task_space_correction(&model, &q, &measured, &jy, &desired, &right)?;
        let raw = &desired - &jy * &measured;
        let proj = projected_error(&desired, &jy, &measured, &c, 1.0)?;
        println!("{name:12} raw error {:.4}, projected {:.2e}", raw.amax(), proj.amax());
    }

    // stacked, the three rows share one impulse and the pitch offset survives
    let stacked = DMatrix::from_fn(3, 7, |r, c| if r == 0 { pitch[(0, c)] } else { j[(r - 1, c)] });
    let desired = &stacked * &desired_v;
    let c = task_space_correction(&model, &q, &measured, &stacked, &desired, &right)?;
    let proj = projected_error(&desired, &stacked, &measured, &c, 1.0)?;
    println!("stacked      projected pitch {:.4}, foot {:.4}", proj[0], proj.rows(1, 2).amax());
    Ok(())
}
