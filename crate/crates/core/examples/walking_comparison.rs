//! Perturbed walking: the three variants land with the same extra downward
//! swing-foot velocity.

use impact_invariant::experiments::{run_walking_comparison, ExperimentSpec, Setup};

fn main() -> impact_invariant::Result<()> {
    let setup = Setup::joint_space_walking()?;
    let spec = ExperimentSpec::walking_comparison();
    let out = run_walking_comparison(&setup, &spec)?;
    println!("{:22} {:>10} {:>14} {:>14}", "variant", "touchdown", "impacting leg", "other leg");
    for r in out.rows() {
        println!(
            "{:22} {:>10.4} {:>14.4} {:>14.4}",
            r.variant,
            r.touchdown.unwrap_or(f64::NAN),
            r.impacting_leg_error.unwrap_or(f64::NAN),
            r.non_impacting_leg_error.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
