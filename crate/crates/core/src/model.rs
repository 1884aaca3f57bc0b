//! Planar five-link biped description.
//!
//! Generalized coordinates are ordered `(x, z, pitch, left_hip, left_knee,
//! right_hip, right_knee)`. `(x, z)` is the hip position in the world frame
//! (x forward, z up), `pitch` is the absolute torso angle (counter-clockwise
//! positive, zero upright) and the joint angles are relative to the parent
//! link. A leg hangs straight down when its hip and knee angles and the torso
//! pitch are all zero.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub const NUM_COORDINATES: usize = 7;
pub const BASE_X: usize = 0;
pub const BASE_Z: usize = 1;
pub const PITCH: usize = 2;
pub const LEFT_HIP: usize = 3;
pub const LEFT_KNEE: usize = 4;
pub const RIGHT_HIP: usize = 5;
pub const RIGHT_KNEE: usize = 6;

pub const COORDINATE_NAMES: [&str; NUM_COORDINATES] = [
    "base_x",
    "base_z",
    "torso_pitch",
    "left_hip",
    "left_knee",
    "right_hip",
    "right_knee",
];

pub const TORSO: usize = 0;
pub const LEFT_THIGH: usize = 1;
pub const LEFT_SHANK: usize = 2;
pub const RIGHT_THIGH: usize = 3;
pub const RIGHT_SHANK: usize = 4;

pub const LINK_NAMES: [&str; 5] = ["torso", "left_thigh", "left_shank", "right_thigh", "right_shank"];

/// Coordinate index of a named generalized coordinate.
pub fn coordinate_index(name: &str) -> Option<usize> {
    COORDINATE_NAMES.iter().position(|&c| c == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub name: String,
    /// kg
    pub mass: f64,
    /// m, proximal joint to distal joint
    pub length: f64,
    /// m, proximal joint to center of mass along the link axis
    pub com_offset: f64,
    /// kg·m² about the center of mass
    pub inertia: f64,
}

/// A point fixed on a link, `offset` meters from the link's proximal joint.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPoint {
    pub name: String,
    pub link: usize,
    pub offset: f64,
}

/// Kinematic path to a body point: the point sits at
/// `base + Σ length · d(angle(link))` with `d(φ) = (sin φ, −cos φ)`.
pub(crate) type Segments = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    links: Vec<Link>,
    actuated: Vec<usize>,
    contacts: Vec<ContactPoint>,
    gravity: f64,
    mu: f64,
    torque_limit: f64,
}

impl RobotModel {
    pub fn new(
        links: Vec<Link>,
        actuated: Vec<usize>,
        contacts: Vec<ContactPoint>,
        gravity: f64,
        mu: f64,
        torque_limit: f64,
    ) -> Result<Self> {
        let model = Self {
            links,
            actuated,
            contacts,
            gravity,
            mu,
            torque_limit,
        };
        model.validate()?;
        Ok(model)
    }

    /// Representative five-link walker (32 kg, 0.8 m legs, 12 kg torso).
    pub fn five_link() -> Self {
        let link = |name: &str, mass, length, com_offset, inertia| Link {
            name: name.to_string(),
            mass,
            length,
            com_offset,
            inertia,
        };
        let links = vec![
            link("torso", 12.0, 0.625, 0.24, 1.33),
            link("left_thigh", 6.8, 0.4, 0.11, 0.47),
            link("left_shank", 3.2, 0.4, 0.24, 0.20),
            link("right_thigh", 6.8, 0.4, 0.11, 0.47),
            link("right_shank", 3.2, 0.4, 0.24, 0.20),
        ];
        let contacts = vec![
            ContactPoint {
                name: "left_foot".into(),
                link: LEFT_SHANK,
                offset: 0.4,
            },
            ContactPoint {
                name: "right_foot".into(),
                link: RIGHT_SHANK,
                offset: 0.4,
            },
        ];
        Self::new(
            links,
            vec![LEFT_HIP, LEFT_KNEE, RIGHT_HIP, RIGHT_KNEE],
            contacts,
            9.81,
            0.8,
            150.0,
        )
        .expect("default model is valid")
    }

    fn validate(&self) -> Result<()> {
        if self.links.len() != LINK_NAMES.len() {
            return Err(Error::InvalidModel(format!(
                "expected {} links, found {}",
                LINK_NAMES.len(),
                self.links.len()
            )));
        }
        for (link, expected) in self.links.iter().zip(LINK_NAMES) {
            if link.name != expected {
                return Err(Error::InvalidModel(format!(
                    "link order must be {LINK_NAMES:?}, found {}",
                    link.name
                )));
            }
            for (what, value) in [
                ("mass", link.mass),
                ("length", link.length),
                ("inertia", link.inertia),
            ] {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "{} {what} must be positive, got {value}",
                        link.name
                    )));
                }
            }
            if !link.com_offset.is_finite() {
                return Err(Error::InvalidModel(format!("{} com_offset not finite", link.name)));
            }
        }
        let mut sorted = self.actuated.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.actuated.len()
            || sorted != [LEFT_HIP, LEFT_KNEE, RIGHT_HIP, RIGHT_KNEE]
        {
            return Err(Error::InvalidModel(
                "actuated joints must be the four hip and knee joints".into(),
            ));
        }
        if self.contacts.is_empty() {
            return Err(Error::InvalidModel("no contact points".into()));
        }
        for (i, c) in self.contacts.iter().enumerate() {
            if c.link >= self.links.len() {
                return Err(Error::UnknownLink(c.link.to_string()));
            }
            if self.contacts[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::InvalidModel(format!("duplicate contact name {}", c.name)));
            }
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite()) {
            return Err(Error::InvalidModel("gravity must be nonnegative".into()));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidModel("mu must be nonnegative".into()));
        }
        if !(self.torque_limit > 0.0) {
            return Err(Error::InvalidModel("torque_limit must be positive".into()));
        }
        Ok(())
    }

    pub fn num_positions(&self) -> usize {
        NUM_COORDINATES
    }

    pub fn num_velocities(&self) -> usize {
        NUM_COORDINATES
    }

    pub fn num_actuators(&self) -> usize {
        self.actuated.len()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn actuated_coordinates(&self) -> &[usize] {
        &self.actuated
    }

    pub fn contacts(&self) -> &[ContactPoint] {
        &self.contacts
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    pub fn set_gravity(&mut self, g: f64) {
        self.gravity = g;
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn torque_limit(&self) -> f64 {
        self.torque_limit
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    pub fn leg_length(&self) -> f64 {
        self.links[LEFT_THIGH].length + self.links[LEFT_SHANK].length
    }

    pub fn contact_id(&self, name: &str) -> Result<usize> {
        self.contacts
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownContact(name.to_string()))
    }

    pub fn contact(&self, id: usize) -> Result<&ContactPoint> {
        self.contacts
            .get(id)
            .ok_or_else(|| Error::UnknownContact(id.to_string()))
    }

    /// Actuation matrix B (n × actuators), selecting the actuated coordinates.
    pub fn actuation_matrix(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(NUM_COORDINATES, self.actuated.len());
        for (k, &i) in self.actuated.iter().enumerate() {
            b[(i, k)] = 1.0;
        }
        b
    }

    /// Which generalized coordinates sum into each link's absolute angle.
    pub(crate) fn angle_coordinates(link: usize) -> &'static [usize] {
        match link {
            TORSO => &[PITCH],
            LEFT_THIGH => &[PITCH, LEFT_HIP],
            LEFT_SHANK => &[PITCH, LEFT_HIP, LEFT_KNEE],
            RIGHT_THIGH => &[PITCH, RIGHT_HIP],
            RIGHT_SHANK => &[PITCH, RIGHT_HIP, RIGHT_KNEE],
            _ => unreachable!("five links"),
        }
    }

    /// The torso extends upward from the hip; legs hang downward.
    fn axis_sign(link: usize) -> f64 {
        if link == TORSO {
            -1.0
        } else {
            1.0
        }
    }

    pub(crate) fn segments_to(&self, link: usize, offset: f64) -> Segments {
        let mut segs = Vec::with_capacity(2);
        match link {
            LEFT_SHANK => segs.push((LEFT_THIGH, self.links[LEFT_THIGH].length)),
            RIGHT_SHANK => segs.push((RIGHT_THIGH, self.links[RIGHT_THIGH].length)),
            _ => {}
        }
        segs.push((link, Self::axis_sign(link) * offset));
        segs
    }

    pub(crate) fn com_segments(&self, link: usize) -> Segments {
        self.segments_to(link, self.links[link].com_offset)
    }

    pub(crate) fn contact_segments(&self, id: usize) -> Result<Segments> {
        let c = self.contact(id)?;
        Ok(self.segments_to(c.link, c.offset))
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        file.into_model()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ModelFile::from_model(self)).expect("model serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }
}

/// On-disk model description. See the README for the key reference.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    gravity: f64,
    mu: f64,
    torque_limit: f64,
    actuated_joints: Vec<String>,
    links: Vec<Link>,
    contacts: Vec<ContactFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContactFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    link: String,
    offset: f64,
}

impl ModelFile {
    fn into_model(self) -> Result<RobotModel> {
        let actuated = self
            .actuated_joints
            .iter()
            .map(|j| {
                coordinate_index(j)
                    .filter(|&i| i >= LEFT_HIP)
                    .ok_or_else(|| Error::InvalidModel(format!("unknown joint {j}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let contacts = self
            .contacts
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let link = LINK_NAMES
                    .iter()
                    .position(|&l| l == c.link)
                    .ok_or_else(|| Error::UnknownLink(c.link.clone()))?;
                Ok(ContactPoint {
                    name: c.name.unwrap_or_else(|| format!("{}_point{i}", c.link)),
                    link,
                    offset: c.offset,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        RobotModel::new(
            self.links,
            actuated,
            contacts,
            self.gravity,
            self.mu,
            self.torque_limit,
        )
    }

    fn from_model(model: &RobotModel) -> Self {
        Self {
            gravity: model.gravity,
            mu: model.mu,
            torque_limit: model.torque_limit,
            actuated_joints: model
                .actuated
                .iter()
                .map(|&i| COORDINATE_NAMES[i].to_string())
                .collect(),
            links: model.links.clone(),
            contacts: model
                .contacts
                .iter()
                .map(|c| ContactFile {
                    name: Some(c.name.clone()),
                    link: LINK_NAMES[c.link].to_string(),
                    offset: c.offset,
                })
                .collect(),
        }
    }
}

/// Generalized positions and velocities at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub t: f64,
}

impl RobotState {
    pub fn new(q: DVector<f64>, v: DVector<f64>, t: f64) -> Result<Self> {
        check_dim("state q", NUM_COORDINATES, q.len())?;
        check_dim("state v", NUM_COORDINATES, v.len())?;
        Ok(Self { q, v, t })
    }

    pub fn at_rest(q: DVector<f64>) -> Result<Self> {
        Self::new(q, DVector::zeros(NUM_COORDINATES), 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.v.iter()).all(|x| x.is_finite()) && self.t.is_finite()
    }
}

/// Ordered set of active point contacts; each contributes a tangential (x)
/// and a normal (z) constraint row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ContactSet {
    points: Vec<usize>,
}

impl ContactSet {
    pub fn new(points: Vec<usize>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if points[..i].contains(p) {
                return Err(Error::DuplicateContact(*p));
            }
        }
        Ok(Self { points })
    }

    pub fn empty() -> Self {
        Self { points: Vec::new() }
    }

    pub fn single(point: usize) -> Self {
        Self {
            points: vec![point],
        }
    }

    pub fn from_names(model: &RobotModel, names: &[impl AsRef<str>]) -> Result<Self> {
        let ids = names
            .iter()
            .map(|n| model.contact_id(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ids)
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Constraint dimension c.
    pub fn dim(&self) -> usize {
        2 * self.points.len()
    }

    pub fn contains(&self, point: usize) -> bool {
        self.points.contains(&point)
    }

    pub fn with(&self, point: usize) -> Self {
        let mut points = self.points.clone();
        if !points.contains(&point) {
            points.push(point);
        }
        Self { points }
    }

    pub fn without(&self, point: usize) -> Self {
        Self {
            points: self.points.iter().copied().filter(|&p| p != point).collect(),
        }
    }

    pub fn names(&self, model: &RobotModel) -> Vec<String> {
        self.points
            .iter()
            .map(|&p| model.contacts()[p].name.clone())
            .collect()
    }
}
