//! Generates the walking reference, checks it and writes it as TOML.

use impact_invariant::dynamics::contact_point_position;
use impact_invariant::trajectory::{generate_walking_gait, Side};
use impact_invariant::RobotModel;

fn main() -> impact_invariant::Result<()> {
    let model = RobotModel::five_link();
    let gait = generate_walking_gait(&model, 0.3, 0.7, 0.08)?;
    println!("period {:?} s, impacts at {:?}", gait.period(), gait.impact_times());
    for m in gait.modes() {
        println!("mode {:13} [{:.2}, {:.2}] contacts {:?}", m.name, m.start, m.end, m.contacts);
    }
    println!("reset consistency error {:.2e}", gait.reset_consistency_error(&model)?);
    let right = model.contact_id("right_foot")?;
    for t in [0.0, 0.1, 0.2, 0.3, 0.35] {
        let (q, _, _) = gait.eval_coordinates(t, Side::Pre)?;
        let p = contact_point_position(&model, &q, right)?;
        println!("t = {t:.2}: hip ({:.3}, {:.3}), right foot ({:.3}, {:.3})", q[0], q[1], p.x, p.y);
    }
    let path = std::env::temp_dir().join("gait.toml");
    gait.save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
