//! Rigid touchdown of the right foot at the end of the first step.

use impact_invariant::dynamics::{contact_jacobian, contact_point_position};
use impact_invariant::impact::{angular_momentum_about_point, apply_reset_map};
use impact_invariant::trajectory::{generate_walking_gait, Side};
use impact_invariant::{ContactSet, RobotModel, RobotState};

fn main() -> impact_invariant::Result<()> {
    let model = RobotModel::five_link();
    let gait = generate_walking_gait(&model, 0.3, 0.7, 0.08)?;
    let t_impact = gait.impact_times()[0];
    let (q, mut v, _) = gait.eval_coordinates(t_impact, Side::Pre)?;
    // land a little harder than planned
    v[1] -= 0.1;
    let pre = RobotState::new(q, v, t_impact)?;

    let right = ContactSet::single(model.contact_id("right_foot")?);
    let hit = apply_reset_map(&model, &pre, &right)?;
    let post = RobotState::new(pre.q.clone(), hit.post_velocity.clone(), t_impact)?;

    let foot = contact_point_position(&model, &pre.q, right.points()[0])?;
    let j = contact_jacobian(&model, &pre.q, &right)?;
    println!("impulse (x, z):          {:.4} {:.4} N s", hit.impulse[0], hit.impulse[1]);
    println!("energy dissipated:       {:.5} J", hit.energy_dissipated);
    println!("foot velocity before:    {:?}", (&j * &pre.v).as_slice());
    println!("foot velocity after:     {:?}", (&j * &post.v).as_slice());
    println!(
        "angular momentum about the foot: {:.9} -> {:.9}",
        angular_momentum_about_point(&model, &pre, foot)?,
        angular_momentum_about_point(&model, &post, foot)?
    );
    Ok(())
}
