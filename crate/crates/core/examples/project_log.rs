//! Logs a perturbed rollout, then projects its velocities offline onto the
//! invariant subspace of the landing foot.

use impact_invariant::control::Variant;
use impact_invariant::experiments::{project_log, read_velocity_log, run_walking_comparison, total_variation, ExperimentSpec, Setup};
use impact_invariant::sim::write_timeseries;
use impact_invariant::ContactSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let setup = Setup::joint_space_walking()?;
    let spec = ExperimentSpec {
        variants: vec![Variant::Default],
        ..ExperimentSpec::walking_comparison()
    };
    let cell = run_walking_comparison(&setup, &spec)?.cells.remove(0);
    let dir = std::env::temp_dir();
    let log = dir.join("rollout.csv");
    let file = std::fs::File::create(&log)?;
    write_timeseries(&setup.model, &cell.result, file)?;

    let right = ContactSet::single(setup.model.contact_id("right_foot")?);
    let projected = project_log(&setup.model, &log, &right, &dir.join("projected.csv"))?;
    let raw = read_velocity_log(&log)?;
    let td = cell.row.touchdown.unwrap_or(spec.lead);
    for (i, name) in impact_invariant::model::COORDINATE_NAMES.iter().enumerate() {
        println!(
            "{name:12} variation within 2 ms of touchdown: raw {:.4}, projected {:.4}",
            total_variation(&raw.t, &raw.v, i, td - 0.002, td + 0.002),
            total_variation(&raw.t, &projected, i, td - 0.002, td + 0.002)
        );
    }
    Ok(())
}
