use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mode, OutputTrajectory, PiecewisePolynomial, ReferenceTrajectory};
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "impact-invariant-trajectory";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryFile {
    format: String,
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    period: Option<f64>,
    #[serde(default)]
    impact_times: Vec<f64>,
    #[serde(default)]
    mirror: Vec<[String; 2]>,
    #[serde(default)]
    modes: Vec<Mode>,
    outputs: Vec<OutputFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputFile {
    name: String,
    #[serde(default)]
    period_offset: f64,
    breakpoints: Vec<f64>,
    coefficients: Vec<Vec<f64>>,
}

impl ReferenceTrajectory {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            message,
        };
        let file: TrajectoryFile = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        if file.format != FORMAT_NAME {
            return Err(parse_err(format!("format must be \"{FORMAT_NAME}\", found \"{}\"", file.format)));
        }
        if file.version != FORMAT_VERSION {
            return Err(parse_err(format!("unsupported version {}", file.version)));
        }
        let outputs = file
            .outputs
            .into_iter()
            .map(|o| {
                let poly = PiecewisePolynomial::new(o.breakpoints, o.coefficients)
                    .map_err(|e| parse_err(format!("output {}: {e}", o.name)))?;
                Ok(OutputTrajectory {
                    name: o.name,
                    poly,
                    period_offset: o.period_offset,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mirror = file.mirror.into_iter().map(|[a, b]| (a, b)).collect();
        Self::new(outputs, file.modes, file.impact_times, file.period, mirror)
    }

    pub fn to_toml_string(&self) -> String {
        let file = TrajectoryFile {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            period: self.period,
            impact_times: self.impact_times.clone(),
            mirror: self.mirror.iter().map(|(a, b)| [a.clone(), b.clone()]).collect(),
            modes: self.modes.clone(),
            outputs: self
                .outputs
                .iter()
                .map(|o| OutputFile {
                    name: o.name.clone(),
                    period_offset: o.period_offset,
                    breakpoints: o.poly.breakpoints().to_vec(),
                    coefficients: o.poly.coefficients().to_vec(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("trajectory serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }
}
