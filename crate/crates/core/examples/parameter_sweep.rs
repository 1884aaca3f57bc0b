//! Platform height and ground stiffness sweeps with the operational space
//! controller. Pass an output directory to also write the CSVs.

use impact_invariant::experiments::{run_sweep, ExperimentSpec, Setup};

fn main() -> impact_invariant::Result<()> {
    let setup = Setup::osc_walking()?;
    let out_dir = std::env::args().nth(1).map(std::path::PathBuf::from);
    for (name, spec) in [("height", ExperimentSpec::height_sweep()), ("stiffness", ExperimentSpec::stiffness_sweep())] {
        let spec = ExperimentSpec {
            out_dir: out_dir.as_ref().map(|d| d.join(name)),
            ..spec
        };
        println!("{name} sweep");
        for r in run_sweep(&setup, &spec)?.rows() {
            println!(
                "  {:40} J_mot {:8.2}  J_acc {:.4}",
                r.cell,
                r.j_mot.unwrap_or(f64::NAN),
                r.j_acc.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
