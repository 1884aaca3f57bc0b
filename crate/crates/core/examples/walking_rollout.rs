//! Closed-loop walking on rigid ground with the joint-space controller.

use impact_invariant::control::{Controller, ControllerSpec};
use impact_invariant::sim::{rollout, EventKind, SimConfig};
use impact_invariant::trajectory::{generate_walking_gait, Side};
use impact_invariant::{RobotModel, RobotState};

fn main() -> impact_invariant::Result<()> {
    let model = RobotModel::five_link();
    let gait = generate_walking_gait(&model, 0.3, 0.7, 0.08)?;
    let (q, v, _) = gait.eval_coordinates(0.0, Side::Post)?;
    let mut ctl = Controller::new(model.clone(), ControllerSpec::joint_space_default(), gait)?;
    let config = SimConfig {
        t_final: 1.4,
        ..SimConfig::default()
    };
    let result = rollout(&mut ctl, &RobotState::new(q, v, 0.0)?, &config)?;
    println!("{} after {} samples", result.termination.label(), result.samples.len());
    for e in result.events.iter().filter(|e| e.kind == EventKind::Touchdown) {
        println!(
            "t = {:.4}: {} lands, impulse z {:.2} N s, KE {:.3} -> {:.3} J",
            e.t,
            model.contacts()[e.contact].name,
            e.impulse[1],
            e.ke_pre,
            e.ke_post
        );
    }
    println!("hip travelled {:.3} m", result.final_state.q[0]);
    Ok(())
}
