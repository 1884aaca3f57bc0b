use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use impact_invariant::control::{ControllerSpec, Variant};
use impact_invariant::experiments::{self, ExperimentOutput, ExperimentSpec, Setup};
use impact_invariant::sim::SimConfig;
use impact_invariant::trajectory::{generate_walking_gait, ReferenceTrajectory};
use impact_invariant::{ContactSet, Error, Result, RobotModel};

#[derive(Parser)]
#[command(name = "impact-invariant", version, about = "Impact-invariant control experiments for a planar biped")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out one controller variant around a nominal impact.
    Simulate(RunArgs),
    /// Perturbed walking comparison of the controller variants.
    CompareWalking(RunArgs),
    /// Terrain-height, ground-stiffness or window-duration sweep.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Generate the periodic walking reference and save it as TOML.
    GenGait {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Forward progress per period (m).
        #[arg(long, default_value_t = 0.3)]
        step_length: f64,
        /// Gait period, two steps (s).
        #[arg(long, default_value_t = 0.7)]
        period: f64,
        /// Peak swing-foot height (m).
        #[arg(long, default_value_t = 0.08)]
        clearance: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project logged generalized velocities onto the impact-invariant subspace.
    ProjectLog {
        #[arg(long)]
        model: Option<PathBuf>,
        /// CSV with columns t, q0..q6, v0..v6.
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated contact names, e.g. `right_foot`.
        #[arg(long, value_delimiter = ',', default_value = "right_foot")]
        contacts: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Height,
    Stiffness,
    Window,
}

#[derive(Args)]
struct RunArgs {
    /// Robot model TOML; the built-in five-link walker when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Reference trajectory TOML; the generated gait when omitted.
    #[arg(long)]
    traj: Option<PathBuf>,
    /// `joint_space`, `osc` or a controller TOML.
    #[arg(long)]
    controller: Option<String>,
    /// Comma-separated variants; all three when omitted.
    #[arg(long, value_delimiter = ',')]
    variant: Vec<String>,
    /// Swing-foot vertical velocity perturbation (m/s), negative is downward.
    #[arg(long, allow_negative_numbers = true)]
    perturb: Option<f64>,
    /// Projection window half-widths (ms).
    #[arg(long, value_delimiter = ',')]
    window_ms: Vec<f64>,
    /// Platform heights under the landing foot (m).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    heights: Vec<f64>,
    /// Penetration allowances (m); 0 selects rigid ground.
    #[arg(long, value_delimiter = ',')]
    allowances: Vec<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn load_model(path: Option<&Path>) -> Result<RobotModel> {
    path.map_or_else(|| Ok(RobotModel::five_link()), RobotModel::load)
}

impl RunArgs {
    fn setup(&self, default_controller: &str) -> Result<Setup> {
        let model = load_model(self.model.as_deref())?;
        let trajectory = match &self.traj {
            Some(p) => ReferenceTrajectory::load(p)?,
            None => generate_walking_gait(&model, 0.3, 0.7, 0.08)?,
        };
        let controller = match self.controller.as_deref().unwrap_or(default_controller) {
            "joint_space" => ControllerSpec::joint_space_default(),
            "osc" => ControllerSpec::osc_default(&model)?,
            path => ControllerSpec::load(path, &model)?,
        };
        Ok(Setup {
            model,
            trajectory,
            controller,
            sim: SimConfig::default(),
        })
    }

    fn apply(&self, mut spec: ExperimentSpec) -> Result<ExperimentSpec> {
        if !self.variant.is_empty() {
            spec.variants = self.variant.iter().map(|v| Variant::parse(v)).collect::<Result<_>>()?;
        }
        if let Some(p) = self.perturb {
            spec.perturbation = p;
        }
        if !self.window_ms.is_empty() {
            spec.window_ms = self.window_ms.clone();
        }
        if !self.heights.is_empty() {
            spec.heights = self.heights.clone();
        }
        if !self.allowances.is_empty() {
            spec.allowances = self.allowances.clone();
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        spec.out_dir = Some(self.out_dir.clone());
        Ok(spec)
    }
}

fn report(out: &ExperimentOutput, dir: &Path) {
    println!("{:<44} {:>10} {:>8} {:>10} {:>10}  termination", "cell", "J_mot", "J_acc", "imp_err", "non_err");
    let fmt = |x: Option<f64>, p: usize| x.map_or("-".to_string(), |v| format!("{v:.p$}"));
    for r in out.rows() {
        println!(
            "{:<44} {:>10} {:>8} {:>10} {:>10}  {}",
            r.cell,
            fmt(r.j_mot, 2),
            fmt(r.j_acc, 4),
            fmt(r.impacting_leg_error, 4),
            fmt(r.non_impacting_leg_error, 4),
            r.termination
        );
    }
    println!("wrote {}", dir.display());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let mut spec = args.apply(ExperimentSpec::walking_comparison())?;
            if args.variant.is_empty() {
                spec.variants = vec![Variant::ImpactInvariant];
            }
            if spec.variants.len() != 1 {
                return Err(Error::InvalidExperiment("simulate takes a single variant".into()));
            }
            let out = experiments::run_sweep(&args.setup("joint_space")?, &spec)?;
            report(&out, &args.out_dir);
        }
        Command::CompareWalking(args) => {
            let spec = args.apply(ExperimentSpec::walking_comparison())?;
            let out = experiments::run_walking_comparison(&args.setup("joint_space")?, &spec)?;
            report(&out, &args.out_dir);
        }
        Command::Sweep { kind, run } => {
            let base = match kind {
                SweepKind::Height => ExperimentSpec::height_sweep(),
                SweepKind::Stiffness => ExperimentSpec::stiffness_sweep(),
                SweepKind::Window => ExperimentSpec::window_sweep(),
            };
            let spec = run.apply(base)?;
            let out = experiments::run_sweep(&run.setup("osc")?, &spec)?;
            report(&out, &run.out_dir);
        }
        Command::GenGait {
            model,
            step_length,
            period,
            clearance,
            out,
        } => {
            let model = load_model(model.as_deref())?;
            let traj = generate_walking_gait(&model, step_length, period, clearance)?;
            traj.save(&out)?;
            println!(
                "wrote {} (reset consistency error {:.2e})",
                out.display(),
                traj.reset_consistency_error(&model)?
            );
        }
        Command::ProjectLog {
            model,
            input,
            contacts,
            out,
        } => {
            let model = load_model(model.as_deref())?;
            let set = ContactSet::from_names(&model, &contacts)?;
            let projected = experiments::project_log(&model, &input, &set, &out)?;
            println!("projected {} samples into {}", projected.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
