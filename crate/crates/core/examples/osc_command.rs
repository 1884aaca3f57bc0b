//! One operational space control command inside the projection window, for
//! each variant, after an impulse has disturbed the robot.

use impact_invariant::control::{Controller, ControllerSpec, Variant};
use impact_invariant::dynamics::{contact_jacobian, mass_matrix};
use impact_invariant::trajectory::{generate_walking_gait, Side};
use impact_invariant::{ContactSet, RobotModel, RobotState};
use nalgebra::DVector;

fn main() -> impact_invariant::Result<()> {
    let model = RobotModel::five_link();
    let gait = generate_walking_gait(&model, 0.3, 0.7, 0.08)?;
    let t = 0.345;
    let (q, v, _) = gait.eval_coordinates(t, Side::Post)?;
    let right = ContactSet::single(model.contact_id("right_foot")?);
    let j = contact_jacobian(&model, &q, &right)?;
    let kick = mass_matrix(&model, &q)?.lu().solve(&(j.transpose() * DVector::from_vec(vec![1.0, 8.0]))).unwrap();
    let state = RobotState::new(q, v + kick, t)?;

    for variant in Variant::ALL {
        let spec = ControllerSpec::osc_default(&model)?.with_variant(variant);
        let mut ctl = Controller::new(model.clone(), spec, gait.clone())?;
        let cmd = ctl.compute(&state)?;
        println!("{:22} alpha {:.3}  u = {:?}", variant.name(), cmd.alpha, cmd.u.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>());
        for o in &cmd.outputs {
            println!("    {:18} velocity error {:8.4}  fed back {:8.4}", o.name, o.velocity.amax(), o.feedback_velocity.amax());
        }
    }
    Ok(())
}
