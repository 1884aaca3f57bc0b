//! Penalty ground: static sinkage under full weight for each allowance.

use impact_invariant::sim::{compliant_contact_force, CompliantGround, Terrain};
use impact_invariant::RobotModel;
use nalgebra::DVector;

fn main() -> impact_invariant::Result<()> {
    let model = RobotModel::five_link();
    let weight = model.total_mass() * model.gravity();
    // left leg straight down, right knee bent so only the left foot touches
    let mut q = DVector::zeros(7);
    q[6] = -1.0;
    let feet_at = 0.8;
    for allowance in [1e-5, 1e-4, 1e-3, 5e-3] {
        let ground = CompliantGround {
            penetration_allowance: allowance,
            damping: 50.0,
            friction_velocity: 0.05,
        };
        // bisect on hip height for total normal force = weight
        let (mut lo, mut hi) = (feet_at - 0.1, feet_at);
        for _ in 0..100 {
            q[1] = 0.5 * (lo + hi);
            let f: f64 = compliant_contact_force(&model, &q, &DVector::zeros(7), &Terrain::flat(), &ground)?.iter().map(|f| f.y).sum();
            if f > weight { lo = q[1] } else { hi = q[1] }
        }
        println!("allowance {allowance:.0e} m: stiffness {:.3e} N/m, sinkage {:.3e} m", ground.stiffness(&model), feet_at - q[1]);
    }
    Ok(())
}
