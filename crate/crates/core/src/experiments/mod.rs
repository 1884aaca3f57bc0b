//! Experiment harness: the perturbed walking comparison between controller
//! variants, terrain-height, ground-stiffness and window-duration sweeps, and
//! offline projection of logged velocities.
//!
//! Every rollout starts `lead` seconds before a nominal impact from the
//! reference state, optionally perturbed, so all variants see the identical
//! initial condition. Variants only differ inside their projection windows.

mod metrics;
mod project;

pub use metrics::{
    acceleration_error, integrate_window, integrated_velocity_error, jacc_normalization, metric_jacc, metric_jmot,
    JACC_REFERENCE_ERROR, JACC_SAMPLES, JACC_SPREAD,
};
pub use project::{project_log, project_velocities, read_velocity_log, total_variation, VelocityLog};

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::{Controller, ControllerSpec, Variant};
use crate::dynamics::{contact_jacobian, contact_point_position};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ContactSet, RobotModel, RobotState};
use crate::sim::{rollout, write_events, write_timeseries, ContactModel, SimConfig, SimResult, Terrain};
use crate::trajectory::{self, ReferenceTrajectory, Side};

/// Post-impact velocity errors are integrated over this long after touchdown.
pub const POST_IMPACT_HORIZON: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    WalkingComparison,
    HeightSweep,
    StiffnessSweep,
    WindowSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::WalkingComparison => "walking_comparison",
            Self::HeightSweep => "height_sweep",
            Self::StiffnessSweep => "stiffness_sweep",
            Self::WindowSweep => "window_sweep",
        }
    }
}

/// Everything one experiment varies. A cell is one element of
/// `heights × allowances × window_ms × variants`; an allowance of 0 selects
/// rigid ground.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub variants: Vec<Variant>,
    /// Added to the swing-foot vertical velocity at rollout start (m/s).
    pub perturbation: f64,
    /// Projection window half-widths (ms).
    pub window_ms: Vec<f64>,
    /// Height of the platform under the landing foot (m).
    pub heights: Vec<f64>,
    /// Compliant-ground penetration allowances (m); 0 means rigid ground.
    pub allowances: Vec<f64>,
    pub seed: u64,
    /// Uniform noise amplitude on the actuated joint velocities (rad/s).
    pub initial_noise: f64,
    /// Rollouts start this long before the nominal impact (s).
    pub lead: f64,
    /// Which nominal impact of the schedule to study.
    pub impact_index: usize,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Perturbed walking, three variants, 25 ms windows, rigid ground.
    pub fn walking_comparison() -> Self {
        Self {
            kind: ExperimentKind::WalkingComparison,
            variants: Variant::ALL.to_vec(),
            perturbation: -0.1,
            window_ms: vec![25.0],
            heights: vec![0.0],
            allowances: vec![0.0],
            seed: 0,
            initial_noise: 0.0,
            lead: 0.1,
            impact_index: 0,
            out_dir: None,
        }
    }

    /// Perturbed landings on compliant ground with a platform under the
    /// landing foot.
    pub fn height_sweep() -> Self {
        Self {
            kind: ExperimentKind::HeightSweep,
            heights: vec![0.0, 0.025, 0.05],
            allowances: vec![1e-3],
            ..Self::walking_comparison()
        }
    }

    pub fn stiffness_sweep() -> Self {
        Self {
            kind: ExperimentKind::StiffnessSweep,
            heights: vec![0.0],
            allowances: vec![1e-5, 1e-4, 1e-3, 5e-3],
            ..Self::height_sweep()
        }
    }

    pub fn window_sweep() -> Self {
        Self {
            kind: ExperimentKind::WindowSweep,
            window_ms: vec![5.0, 10.0, 15.0, 20.0, 25.0],
            ..Self::height_sweep()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidExperiment(m.to_string()));
        if self.variants.is_empty() || self.window_ms.is_empty() || self.heights.is_empty() || self.allowances.is_empty() {
            return bad("sweep lists must be nonempty");
        }
        if self.window_ms.iter().any(|w| !(*w > 0.0)) {
            return bad("window durations must be positive");
        }
        if self.allowances.iter().any(|a| !(*a >= 0.0)) {
            return bad("penetration allowances must be nonnegative");
        }
        if self.heights.iter().any(|h| !h.is_finite()) || !self.perturbation.is_finite() {
            return bad("heights and perturbation must be finite");
        }
        if !(self.lead > 0.0) || self.initial_noise < 0.0 {
            return bad("lead must be positive and noise nonnegative");
        }
        Ok(())
    }

    /// Longest window half-width (s); effort and acceleration error are
    /// measured against it so all cells are comparable.
    pub fn max_half_width(&self) -> f64 {
        self.window_ms.iter().copied().fold(0.0, f64::max) * 1e-3
    }
}

/// Robot, reference, controller and simulator shared by every cell.
#[derive(Debug, Clone)]
pub struct Setup {
    pub model: RobotModel,
    pub trajectory: ReferenceTrajectory,
    pub controller: ControllerSpec,
    pub sim: SimConfig,
}

impl Setup {
    /// Default gait with the joint-space controller on rigid ground.
    pub fn joint_space_walking() -> Result<Self> {
        let model = RobotModel::five_link();
        let trajectory = trajectory::generate_walking_gait(&model, 0.3, 0.7, 0.08)?;
        Ok(Self {
            model,
            trajectory,
            controller: ControllerSpec::joint_space_default(),
            sim: SimConfig::default(),
        })
    }

    /// Default gait with the operational space controller on rigid ground.
    pub fn osc_walking() -> Result<Self> {
        let base = Self::joint_space_walking()?;
        Ok(Self {
            controller: ControllerSpec::osc_default(&base.model)?,
            ..base
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub experiment: String,
    pub cell: String,
    pub variant: String,
    pub height: f64,
    pub allowance: f64,
    pub window_ms: f64,
    pub perturbation: f64,
    pub seed: u64,
    /// Nominal impact time studied.
    pub t_switch: f64,
    /// First actual touchdown of the impacting foot.
    pub touchdown: Option<f64>,
    pub j_mot: Option<f64>,
    pub j_acc: Option<f64>,
    pub impacting_leg_error: Option<f64>,
    pub non_impacting_leg_error: Option<f64>,
    pub success: bool,
    pub termination: String,
    pub config_hash: String,
}

/// One simulated cell with its metrics.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub row: MetricsRow,
    pub result: SimResult,
    pub impacting_joints: [usize; 2],
    pub non_impacting_joints: [usize; 2],
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub cells: Vec<CellResult>,
}

impl ExperimentOutput {
    pub fn rows(&self) -> Vec<MetricsRow> {
        self.cells.iter().map(|c| c.row.clone()).collect()
    }

    pub fn cell(&self, name: &str) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.row.cell == name)
    }

    /// Cells of one variant, in sweep order.
    pub fn variant(&self, variant: Variant) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(move |c| c.row.variant == variant.name())
    }
}

/// Hip and knee coordinates of the leg carrying `contact`.
pub fn leg_joints(model: &RobotModel, contact: usize) -> Result<[usize; 2]> {
    let link = model.contact(contact)?.link;
    let chain = RobotModel::angle_coordinates(link);
    match chain {
        [_, hip, knee] => Ok([*hip, *knee]),
        _ => Err(Error::InvalidExperiment(format!("contact {contact} is not on a shank"))),
    }
}

/// Adds `dvz` to the vertical velocity of `swing` with the smallest change
/// in generalized velocity that leaves the stance contacts and the swing
/// foot's horizontal velocity untouched.
pub fn perturb_swing_foot(model: &RobotModel, state: &RobotState, stance: &ContactSet, swing: usize, dvz: f64) -> Result<RobotState> {
    let set = stance.with(swing);
    let a = contact_jacobian(model, &state.q, &set)?;
    let mut b = DVector::zeros(set.dim());
    let row = set.points().iter().position(|&p| p == swing).expect("swing point in set");
    b[2 * row + 1] = dvz;
    let dv = linalg::pseudo_inverse(&a, linalg::RANK_TOLERANCE) * b;
    Ok(RobotState {
        v: &state.v + dv,
        ..state.clone()
    })
}

fn cell_name(variant: Variant, height: f64, allowance: f64, window_ms: f64) -> String {
    let ground = if allowance == 0.0 { "rigid".to_string() } else { format!("a{allowance:e}") };
    format!("{}_h{height}_{ground}_w{window_ms}", variant.name())
}

fn config_hash(setup: &Setup, controller: &ControllerSpec, sim: &SimConfig, initial: &RobotState) -> Result<String> {
    let neutral = controller.clone().with_variant(Variant::Default);
    let mut h = Sha256::new();
    h.update(setup.model.to_toml_string());
    h.update(setup.trajectory.to_toml_string());
    h.update(neutral.to_toml_string(&setup.model));
    h.update(toml::to_string(sim).map_err(|e| Error::InvalidSimConfig(e.to_string()))?);
    for x in initial.q.iter().chain(initial.v.iter()).chain([initial.t].iter()) {
        h.update(x.to_le_bytes());
    }
    Ok(h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect())
}

struct Cell {
    variant: Variant,
    height: f64,
    allowance: f64,
    window_ms: f64,
}

/// Nominal impact time, impacting contact and stance contacts for the spec.
fn impact_of(setup: &Setup, spec: &ExperimentSpec) -> Result<(f64, usize, ContactSet)> {
    let traj = &setup.trajectory;
    let t_switch = *traj
        .impact_times()
        .get(spec.impact_index)
        .ok_or_else(|| Error::InvalidExperiment(format!("trajectory has no impact #{}", spec.impact_index)))?;
    let gained = ContactSet::from_names(&setup.model, &traj.impacting_contacts(t_switch)?)?;
    let [swing] = gained.points() else {
        return Err(Error::InvalidExperiment("expected exactly one impacting contact".into()));
    };
    let mode = traj.mode_at(t_switch, Side::Pre)?;
    let stance = ContactSet::from_names(&setup.model, &mode.contacts)?;
    Ok((t_switch, *swing, stance))
}

/// Reference state at `t_switch − lead`, perturbed and jittered per `spec`.
pub fn initial_state(setup: &Setup, spec: &ExperimentSpec) -> Result<RobotState> {
    let (t_switch, swing, stance) = impact_of(setup, spec)?;
    let t0 = t_switch - spec.lead;
    let (q, v, _) = setup.trajectory.eval_coordinates(t0, Side::Post)?;
    let mut state = perturb_swing_foot(&setup.model, &RobotState::new(q, v, t0)?, &stance, swing, spec.perturbation)?;
    if spec.initial_noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for &j in setup.model.actuated_coordinates() {
            state.v[j] += rng.random_range(-spec.initial_noise..=spec.initial_noise);
        }
    }
    Ok(state)
}

fn run_cell(setup: &Setup, spec: &ExperimentSpec, cell: &Cell, initial: &RobotState) -> Result<CellResult> {
    let (t_switch, swing, stance) = impact_of(setup, spec)?;
    let stance_point = *stance
        .points()
        .first()
        .ok_or_else(|| Error::InvalidExperiment("impact from flight is not supported".into()))?;
    let t_max = spec.max_half_width();
    let controller = ControllerSpec {
        variant: cell.variant,
        window_half_width: cell.window_ms * 1e-3,
        ..setup.controller.clone()
    };
    // the platform covers everything ahead of the swing foot at rollout start
    let foot = contact_point_position(&setup.model, &initial.q, swing)?;
    let terrain = if cell.height == 0.0 {
        setup.sim.terrain.clone()
    } else if foot.y > cell.height {
        Terrain::step_at(foot.x, cell.height)
    } else {
        return Err(Error::InvalidExperiment(format!(
            "platform height {} m is above the swing foot at rollout start ({:.3} m)",
            cell.height, foot.y
        )));
    };
    let sim = SimConfig {
        contact_model: if cell.allowance == 0.0 { ContactModel::RigidHybrid } else { ContactModel::Compliant },
        penetration_allowance: if cell.allowance == 0.0 { setup.sim.penetration_allowance } else { cell.allowance },
        terrain,
        t_final: t_switch + t_max.max(POST_IMPACT_HORIZON) + 0.02,
        ..setup.sim.clone()
    };
    let hash = config_hash(setup, &controller, &sim, initial)?;
    let mut ctl = Controller::new(setup.model.clone(), controller.clone(), setup.trajectory.clone())?;
    let result = rollout(&mut ctl, initial, &sim)?;

    let impacting = leg_joints(&setup.model, swing)?;
    let non_impacting = leg_joints(&setup.model, stance_point)?;
    let touchdown = result.first_touchdown_after(swing, initial.t).map(|e| e.t);
    let ok = result.termination.is_success();
    let j_mot = ok.then(|| metric_jmot(&result, t_switch - t_max, t_switch + t_max)).transpose()?;
    let pelvis = ["torso_pitch", "base_z"];
    let j_acc = if ok && pelvis.iter().all(|n| controller.outputs.iter().any(|o| o.name == *n)) {
        let norm = jacc_normalization(&controller, "base_z")?;
        Some(metric_jacc(&result, &controller, &pelvis, t_switch + t_max, norm)?)
    } else {
        None
    };
    let leg_error = |joints: &[usize]| -> Result<Option<f64>> {
        match touchdown {
            Some(td) if ok && td + POST_IMPACT_HORIZON <= sim.t_final - sim.dt => Ok(Some(integrated_velocity_error(&result, &setup.trajectory, joints, td, td + POST_IMPACT_HORIZON)?)),
            _ => Ok(None),
        }
    };
    let row = MetricsRow {
        experiment: spec.kind.name().to_string(),
        cell: cell_name(cell.variant, cell.height, cell.allowance, cell.window_ms),
        variant: cell.variant.name().to_string(),
        height: cell.height,
        allowance: cell.allowance,
        window_ms: cell.window_ms,
        perturbation: spec.perturbation,
        seed: spec.seed,
        t_switch,
        touchdown,
        j_mot,
        j_acc,
        impacting_leg_error: leg_error(&impacting)?,
        non_impacting_leg_error: leg_error(&non_impacting)?,
        success: ok && touchdown.is_some(),
        termination: result.termination.label().to_string(),
        config_hash: hash,
    };
    Ok(CellResult {
        row,
        result,
        impacting_joints: impacting,
        non_impacting_joints: non_impacting,
    })
}

/// Runs the full cross product of the spec, in parallel, merged in cell order.
pub fn run_sweep(setup: &Setup, spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let initial = initial_state(setup, spec)?;
    let mut cells = Vec::new();
    for &height in &spec.heights {
        for &allowance in &spec.allowances {
            for &window_ms in &spec.window_ms {
                for &variant in &spec.variants {
                    cells.push(Cell {
                        variant,
                        height,
                        allowance,
                        window_ms,
                    });
                }
            }
        }
    }
    let results: Vec<CellResult> = cells
        .par_iter()
        .map(|c| run_cell(setup, spec, c, &initial))
        .collect::<Result<_>>()?;
    // variants of the same physical setting must share one configuration
    for group in results.chunks(spec.variants.len()) {
        if group.iter().any(|c| c.row.config_hash != group[0].row.config_hash) {
            return Err(Error::InvalidExperiment(format!("configuration differs between variants of {}", group[0].row.cell)));
        }
    }
    let out = ExperimentOutput { cells: results };
    if let Some(dir) = &spec.out_dir {
        write_outputs(setup, &out, dir)?;
    }
    Ok(out)
}

/// The perturbed walking comparison: identical gains and initial state for
/// every variant, one rollout each.
pub fn run_walking_comparison(setup: &Setup, spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    if spec.kind != ExperimentKind::WalkingComparison {
        return Err(Error::InvalidExperiment(format!("expected a walking comparison, got {}", spec.kind.name())));
    }
    run_sweep(setup, spec)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn create_file(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Writes `metrics.csv`, `timeseries/<cell>.csv`, `events/<cell>.csv` and
/// `errors/<cell>.csv` (per-leg joint velocity errors and torques).
pub fn write_outputs(setup: &Setup, out: &ExperimentOutput, dir: &Path) -> Result<()> {
    for sub in ["timeseries", "events", "errors"] {
        create_dir(&dir.join(sub))?;
    }
    write_metrics(&out.rows(), create_file(&dir.join("metrics.csv"))?)?;
    for c in &out.cells {
        let name = &c.row.cell;
        write_timeseries(&setup.model, &c.result, create_file(&dir.join("timeseries").join(format!("{name}.csv")))?)?;
        write_events(&setup.model, &c.result, create_file(&dir.join("events").join(format!("{name}.csv")))?)?;
        write_leg_errors(setup, c, create_file(&dir.join("errors").join(format!("{name}.csv")))?)?;
    }
    Ok(())
}

pub fn write_metrics<W: std::io::Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("metrics.csv", e))
}

/// Columns `t, alpha, in_window, imp_hip, imp_knee, non_hip, non_knee, u0..u3`
/// with errors `v_ref − v` on the impacting and non-impacting legs.
pub fn write_leg_errors<W: std::io::Write>(setup: &Setup, cell: &CellResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["t", "alpha", "in_window", "imp_hip", "imp_knee", "non_hip", "non_knee"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..setup.model.num_actuators()).map(|i| format!("u{i}")));
    w.write_record(&header)?;
    for s in &cell.result.samples {
        let (_, v_ref, _) = setup.trajectory.eval_coordinates(s.state.t, Side::Post)?;
        let mut row = vec![s.state.t.to_string(), s.command.alpha.to_string(), u8::from(s.command.in_window).to_string()];
        for &j in cell.impacting_joints.iter().chain(&cell.non_impacting_joints) {
            row.push((v_ref[j] - s.state.v[j]).to_string());
        }
        row.extend(s.command.u.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("errors csv", e))
}
