use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{coordinate_index, RobotModel, COORDINATE_NAMES};

/// How feedback is treated inside the projection window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// No special handling of impacts.
    Default,
    /// Derivative gains zeroed inside the window.
    #[serde(alias = "no_derivative")]
    NoDerivativeWindow,
    /// Velocity errors projected onto the impact-invariant subspace inside the window.
    ImpactInvariant,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Default, Variant::NoDerivativeWindow, Variant::ImpactInvariant];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Default => "default",
            Variant::NoDerivativeWindow => "no_derivative_window",
            Variant::ImpactInvariant => "impact_invariant",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Variant::Default),
            "no_derivative" | "no_derivative_window" => Ok(Variant::NoDerivativeWindow),
            "impact_invariant" => Ok(Variant::ImpactInvariant),
            other => Err(Error::InvalidController(format!("unknown variant {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    JointSpace,
    Osc,
}

/// How the operational space controller groups outputs when projecting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    /// One impulse correction per output; the impacting foot loses all of
    /// its velocity feedback.
    #[default]
    PerOutput,
    /// One correction for all active outputs stacked together.
    Stacked,
}

/// What an output measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputKind {
    /// A single generalized coordinate.
    Coordinate(usize),
    /// Planar world position of a contact point.
    ContactPoint(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputDef {
    pub name: String,
    pub kind: OutputKind,
    pub kp: Vec<f64>,
    pub kd: Vec<f64>,
    pub weight: Vec<f64>,
    /// Modes in which the output is tracked; empty means all.
    pub modes: Vec<String>,
}

impl OutputDef {
    pub fn dim(&self) -> usize {
        match self.kind {
            OutputKind::Coordinate(_) => 1,
            OutputKind::ContactPoint(_) => 2,
        }
    }

    pub fn coordinate(name: &str, kp: f64, kd: f64, weight: f64) -> Result<Self> {
        let c = coordinate_index(name).ok_or_else(|| Error::UnknownOutput(name.to_string()))?;
        Ok(Self {
            name: name.to_string(),
            kind: OutputKind::Coordinate(c),
            kp: vec![kp],
            kd: vec![kd],
            weight: vec![weight],
            modes: Vec::new(),
        })
    }

    pub fn active_in(&self, mode: &str) -> bool {
        self.modes.is_empty() || self.modes.iter().any(|m| m == mode)
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        let gains_ok = [&self.kp, &self.kd, &self.weight]
            .iter()
            .all(|g| g.len() == d && g.iter().all(|x| x.is_finite() && *x >= 0.0));
        if !gains_ok {
            return Err(Error::InvalidController(format!(
                "output {}: kp, kd and weight need {d} nonnegative entries",
                self.name
            )));
        }
        Ok(())
    }
}

/// Full controller configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    pub variant: Variant,
    pub outputs: Vec<OutputDef>,
    /// Half-width T of the projection window, s.
    pub window_half_width: f64,
    /// Blending time constant τ, s.
    pub tau: f64,
    /// Overrides the model's actuator limit when set.
    pub torque_limit: Option<f64>,
    /// Contact-force regularization in the OSC cost.
    pub force_regularization: f64,
    pub projection: ProjectionMode,
}

impl ControllerSpec {
    /// Joint-space inverse dynamics on the four leg joints.
    pub fn joint_space_default() -> Self {
        let outputs = ["left_hip", "left_knee", "right_hip", "right_knee"]
            .iter()
            .map(|n| OutputDef::coordinate(n, 100.0, 10.0, 1.0).expect("known coordinate"))
            .collect();
        Self {
            kind: ControllerKind::JointSpace,
            variant: Variant::Default,
            outputs,
            window_half_width: 0.025,
            tau: 0.005,
            torque_limit: None,
            force_regularization: 1e-6,
            projection: ProjectionMode::PerOutput,
        }
    }

    /// OSC tracking torso pitch, hip height and the swing foot.
    pub fn osc_default(model: &RobotModel) -> Result<Self> {
        let mut outputs = vec![
            OutputDef::coordinate("torso_pitch", 100.0, 10.0, 1.0)?,
            OutputDef::coordinate("base_z", 100.0, 10.0, 1.0)?,
        ];
        for (foot, swing_mode) in [("right_foot", "left_stance"), ("left_foot", "right_stance")] {
            outputs.push(OutputDef {
                name: format!("{foot}_swing"),
                kind: OutputKind::ContactPoint(model.contact_id(foot)?),
                kp: vec![100.0; 2],
                kd: vec![10.0; 2],
                weight: vec![1.0; 2],
                modes: vec![swing_mode.to_string()],
            });
        }
        Ok(Self {
            kind: ControllerKind::Osc,
            outputs,
            ..Self::joint_space_default()
        })
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self, model: &RobotModel) -> Result<()> {
        if !(self.window_half_width > 0.0 && self.tau > 0.0) {
            return Err(Error::InvalidController("window half-width and tau must be positive".into()));
        }
        if self.outputs.is_empty() {
            return Err(Error::InvalidController("no outputs".into()));
        }
        if !(self.force_regularization >= 0.0) {
            return Err(Error::InvalidController("force regularization must be nonnegative".into()));
        }
        if let Some(l) = self.torque_limit {
            if !(l > 0.0) {
                return Err(Error::InvalidController("torque limit must be positive".into()));
            }
        }
        for o in &self.outputs {
            o.validate()?;
            if let OutputKind::ContactPoint(p) = o.kind {
                model.contact(p)?;
            }
        }
        if self.kind == ControllerKind::JointSpace {
            let mut coords: Vec<usize> = self
                .outputs
                .iter()
                .map(|o| match o.kind {
                    OutputKind::Coordinate(c) => Ok(c),
                    OutputKind::ContactPoint(_) => Err(Error::InvalidController(format!(
                        "joint-space output {} must be a coordinate",
                        o.name
                    ))),
                })
                .collect::<Result<_>>()?;
            coords.sort_unstable();
            let mut actuated = model.actuated_coordinates().to_vec();
            actuated.sort_unstable();
            if coords != actuated {
                return Err(Error::InvalidController(
                    "joint-space outputs must be exactly the actuated joints".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn torque_limit(&self, model: &RobotModel) -> f64 {
        self.torque_limit.unwrap_or(model.torque_limit())
    }

    pub fn from_toml_str(text: &str, origin: &Path, model: &RobotModel) -> Result<Self> {
        let file: SpecFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        let spec = file.into_spec(model)?;
        spec.validate(model)?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>, model: &RobotModel) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path, model)
    }

    pub fn to_toml_string(&self, model: &RobotModel) -> String {
        toml::to_string(&SpecFile::from_spec(self, model)).expect("controller spec serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>, model: &RobotModel) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string(model)).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    kind: ControllerKind,
    variant: Variant,
    window_half_width: f64,
    tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    torque_limit: Option<f64>,
    #[serde(default = "default_force_reg")]
    force_regularization: f64,
    #[serde(default)]
    projection: ProjectionMode,
    outputs: Vec<OutputFile>,
}

fn default_force_reg() -> f64 {
    1e-6
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputFile {
    name: String,
    /// "coordinate" or "contact_point"
    kind: String,
    target: String,
    kp: Vec<f64>,
    kd: Vec<f64>,
    weight: Vec<f64>,
    #[serde(default)]
    modes: Vec<String>,
}

impl SpecFile {
    fn into_spec(self, model: &RobotModel) -> Result<ControllerSpec> {
        let outputs = self
            .outputs
            .into_iter()
            .map(|o| {
                let kind = match o.kind.as_str() {
                    "coordinate" => OutputKind::Coordinate(
                        coordinate_index(&o.target).ok_or_else(|| Error::UnknownOutput(o.target.clone()))?,
                    ),
                    "contact_point" => OutputKind::ContactPoint(model.contact_id(&o.target)?),
                    other => return Err(Error::InvalidController(format!("unknown output kind {other}"))),
                };
                Ok(OutputDef {
                    name: o.name,
                    kind,
                    kp: o.kp,
                    kd: o.kd,
                    weight: o.weight,
                    modes: o.modes,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ControllerSpec {
            kind: self.kind,
            variant: self.variant,
            outputs,
            window_half_width: self.window_half_width,
            tau: self.tau,
            torque_limit: self.torque_limit,
            force_regularization: self.force_regularization,
            projection: self.projection,
        })
    }

    fn from_spec(spec: &ControllerSpec, model: &RobotModel) -> Self {
        Self {
            kind: spec.kind,
            variant: spec.variant,
            window_half_width: spec.window_half_width,
            tau: spec.tau,
            torque_limit: spec.torque_limit,
            force_regularization: spec.force_regularization,
            projection: spec.projection,
            outputs: spec
                .outputs
                .iter()
                .map(|o| {
                    let (kind, target) = match o.kind {
                        OutputKind::Coordinate(c) => ("coordinate", COORDINATE_NAMES[c].to_string()),
                        OutputKind::ContactPoint(p) => ("contact_point", model.contacts()[p].name.clone()),
                    };
                    OutputFile {
                        name: o.name.clone(),
                        kind: kind.to_string(),
                        target,
                        kp: o.kp.clone(),
                        kd: o.kd.clone(),
                        weight: o.weight.clone(),
                        modes: o.modes.clone(),
                    }
                })
                .collect(),
        }
    }
}
