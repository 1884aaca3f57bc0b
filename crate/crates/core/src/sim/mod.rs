//! Closed-loop hybrid simulation of the planar walker.
//!
//! Rigid ground integrates the stance-constrained dynamics and applies the
//! rigid reset at detected touchdowns. Compliant ground replaces both with a
//! penalty force. The controller's mode schedule stays time based either way;
//! the simulator never tells it when the foot actually landed.

mod config;
mod io;
mod step;

pub use config::{ContactModel, Integrator, SimConfig, Terrain, TerrainRegion};
pub use io::{events_header, timeseries_header, write_events, write_timeseries};
pub use step::{
    clearance, compliant_contact_force, constrained_forward_dynamics, detect_touchdown, step_compliant, step_rigid,
    total_energy, Baumgarte, CompliantGround, Stance, Step,
};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::control::{ControlCommand, Controller};
use crate::dynamics::{contact_jacobian, contact_point_position, contact_point_velocity, kinetic_energy, mass_matrix};
use crate::error::Result;
use crate::impact::apply_reset_with;
use crate::model::{ContactSet, RobotModel, RobotState, BASE_Z};

/// A foot closer than this to the ground and not moving up starts in stance.
const INITIAL_CONTACT_TOL: f64 = 1e-6;
/// Post-impact normal velocity below which a previous stance foot is kept.
const PENETRATION_VEL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Rigid touchdown with an impulsive reset.
    Touchdown,
    /// Penalty ground first penetrated (compliant ground, no reset).
    ContactStart,
    Liftoff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactEvent {
    pub t: f64,
    pub kind: EventKind,
    pub contact: usize,
    /// Contacts that took part in the reset.
    pub impact_set: ContactSet,
    /// Impulse per impact-set point, stacked (x, z).
    pub impulse: DVector<f64>,
    pub ke_pre: f64,
    pub ke_post: f64,
    /// `‖J v⁺‖∞` over the impact set.
    pub post_contact_velocity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    /// Velocity exceeded the divergence limit.
    Diverged { t: f64 },
    /// The hip dropped below the minimum height.
    Fell { t: f64 },
    /// The controller or dynamics could not produce a step.
    Failed { t: f64, reason: String },
}

impl Termination {
    pub fn is_success(&self) -> bool {
        matches!(self, Self::Completed)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Completed => "completed",
            Self::Diverged { .. } => "diverged",
            Self::Fell { .. } => "fell",
            Self::Failed { .. } => "failed",
        }
    }
}

/// State, command and physical contact status at the start of a step.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: RobotState,
    pub command: ControlCommand,
    /// Actual contact forces, (x, z) per model contact point; zero if free.
    pub lambda: DVector<f64>,
    pub contacts: ContactSet,
    pub energy: f64,
    /// Work done by the actuators since the rollout start.
    pub actuator_work: f64,
    /// Work done by ground forces since the rollout start, impacts excluded.
    pub contact_work: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub samples: Vec<Sample>,
    pub events: Vec<ContactEvent>,
    pub termination: Termination,
    pub final_state: RobotState,
}

impl SimResult {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.state.t).collect()
    }

    pub fn touchdowns(&self) -> impl Iterator<Item = &ContactEvent> {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Touchdown | EventKind::ContactStart))
    }

    /// First touchdown of `contact` at or after `t`.
    pub fn first_touchdown_after(&self, contact: usize, t: f64) -> Option<&ContactEvent> {
        self.touchdowns().find(|e| e.contact == contact && e.t >= t)
    }
}

/// Contacts that are on the ground and not separating.
pub fn initial_stance(model: &RobotModel, state: &RobotState, terrain: &Terrain) -> Result<Stance> {
    let mut stance = Stance::flight();
    for p in 0..model.contacts().len() {
        let pos = contact_point_position(model, &state.q, p)?;
        let vel = contact_point_velocity(model, &state.q, &state.v, p)?;
        if (pos.y - terrain.height_at(pos.x)).abs() <= INITIAL_CONTACT_TOL && vel.y <= INITIAL_CONTACT_TOL {
            stance = stance.with(p, nalgebra::Vector2::new(pos.x, terrain.height_at(pos.x)));
        }
    }
    Ok(stance)
}

/// Rigid reset at a touchdown of `point`. Previous stance feet are released
/// unless they would move into the ground, in which case they join the
/// impact set.
fn rigid_impact(model: &RobotModel, state: &RobotState, stance: &Stance, point: usize, terrain: &Terrain) -> Result<(RobotState, Stance, ContactEvent)> {
    let m = mass_matrix(model, &state.q)?;
    let pos = contact_point_position(model, &state.q, point)?;
    let anchor = nalgebra::Vector2::new(pos.x, terrain.height_at(pos.x));
    let alone = ContactSet::single(point);
    let mut set = alone.clone();
    let mut reset = apply_reset_with(&m, &contact_jacobian(model, &state.q, &set)?, &state.v)?;
    let sinking: Vec<usize> = stance
        .contacts
        .points()
        .iter()
        .copied()
        .filter(|&p| {
            contact_point_velocity(model, &state.q, &reset.post_velocity, p).map_or(false, |v| v.y < -PENETRATION_VEL_TOL)
        })
        .collect();
    let mut next = Stance::flight().with(point, anchor);
    if !sinking.is_empty() {
        for &p in &sinking {
            set = set.with(p);
        }
        reset = apply_reset_with(&m, &contact_jacobian(model, &state.q, &set)?, &state.v)?;
        for (&p, a) in stance.contacts.points().iter().zip(&stance.anchors) {
            if sinking.contains(&p) {
                next = next.with(p, *a);
            }
        }
    }
    let post = RobotState {
        q: state.q.clone(),
        v: reset.post_velocity.clone(),
        t: state.t,
    };
    let jv = contact_jacobian(model, &state.q, &set)? * &post.v;
    let event = ContactEvent {
        t: state.t,
        kind: EventKind::Touchdown,
        contact: point,
        impact_set: set,
        impulse: reset.impulse,
        ke_pre: kinetic_energy(model, &state.q, &state.v)?,
        ke_post: kinetic_energy(model, &post.q, &post.v)?,
        post_contact_velocity: jv.amax(),
    };
    Ok((post, next, event))
}

fn full_lambda(model: &RobotModel, stance: &Stance, lam: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(2 * model.contacts().len());
    for (i, &p) in stance.contacts.points().iter().enumerate() {
        out[2 * p] = lam[2 * i];
        out[2 * p + 1] = lam[2 * i + 1];
    }
    out
}

struct Rollout<'a> {
    model: &'a RobotModel,
    config: &'a SimConfig,
    baumgarte: Baumgarte,
    ground: CompliantGround,
    stance: Stance,
    events: Vec<ContactEvent>,
    actuator_work: f64,
    contact_work: f64,
    /// Point whose penetration just ended a shortened step; a re-detection
    /// right after is the same contact.
    grazing: Option<usize>,
}

impl Rollout<'_> {
    /// Drops stance contacts that would need to pull on the ground.
    fn release_pulling(&mut self, state: &RobotState, u: &DVector<f64>) -> Result<DVector<f64>> {
        loop {
            let (_, lam) = constrained_forward_dynamics(self.model, &state.q, &state.v, u, &self.stance, self.baumgarte)?;
            let pulling = (0..self.stance.contacts.len())
                .filter(|&i| lam[2 * i + 1] < 0.0)
                .min_by(|&a, &b| lam[2 * a + 1].total_cmp(&lam[2 * b + 1]));
            let Some(i) = pulling else {
                return Ok(full_lambda(self.model, &self.stance, &lam));
            };
            let p = self.stance.contacts.points()[i];
            let ke = kinetic_energy(self.model, &state.q, &state.v)?;
            self.events.push(ContactEvent {
                t: state.t,
                kind: EventKind::Liftoff,
                contact: p,
                impact_set: ContactSet::empty(),
                impulse: DVector::zeros(0),
                ke_pre: ke,
                ke_post: ke,
                post_contact_velocity: 0.0,
            });
            self.stance = self.stance.without(p);
        }
    }

    fn advance(&mut self, state: &RobotState, u: &DVector<f64>, h: f64) -> Result<Step> {
        match self.config.contact_model {
            ContactModel::RigidHybrid => step_rigid(self.model, state, &self.stance, u, h, self.baumgarte),
            ContactModel::Compliant => step_compliant(self.model, state, u, h, &self.config.terrain, &self.ground),
        }
    }

    /// Integrates over `[state.t, t_target]` under a held torque, resolving
    /// touchdowns inside the interval.
    fn hold(&mut self, mut state: RobotState, u: &DVector<f64>, t_target: f64) -> Result<RobotState> {
        let rigid = self.config.contact_model == ContactModel::RigidHybrid;
        while t_target - state.t > 1e-12 {
            let h = t_target - state.t;
            let step = self.advance(&state, u, h)?;
            let exclude = if rigid { self.stance.contacts.clone() } else { ContactSet::empty() };
            let hit = detect_touchdown(self.model, &state, &step.state, &exclude, &self.config.terrain, self.config.event_tolerance)?;
            match hit {
                Some((te, p)) if rigid => {
                    let pre = if te - state.t > 1e-12 {
                        let s = self.advance(&state, u, te - state.t)?;
                        self.actuator_work += s.actuator_work;
                        self.contact_work += s.contact_work;
                        s.state
                    } else {
                        state.clone()
                    };
                    let (post, stance, event) = rigid_impact(self.model, &pre, &self.stance, p, &self.config.terrain)?;
                    self.stance = stance;
                    self.events.push(event);
                    state = post;
                }
                Some((te, p)) if self.grazing != Some(p) => {
                    // stop at first penetration so no step straddles the force kink
                    let step = if te - state.t > 1e-12 { self.advance(&state, u, te - state.t)? } else { step };
                    self.grazing = Some(p);
                    let ke = kinetic_energy(self.model, &step.state.q, &step.state.v)?;
                    self.events.push(ContactEvent {
                        t: step.state.t,
                        kind: EventKind::ContactStart,
                        contact: p,
                        impact_set: ContactSet::single(p),
                        impulse: DVector::zeros(0),
                        ke_pre: ke,
                        ke_post: ke,
                        post_contact_velocity: 0.0,
                    });
                    self.actuator_work += step.actuator_work;
                    self.contact_work += step.contact_work;
                    state = step.state;
                }
                _ => {
                    self.grazing = None;
                    self.actuator_work += step.actuator_work;
                    self.contact_work += step.contact_work;
                    state = step.state;
                }
            }
        }
        Ok(state)
    }
}

/// Simulates `controller` from `initial` until `config.t_final`, holding each
/// command for one step of `config.dt`.
pub fn rollout(controller: &mut Controller, initial: &RobotState, config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let model = controller.model().clone();
    let mut sim = Rollout {
        model: &model,
        config,
        baumgarte: Baumgarte {
            omega: config.baumgarte_omega,
            zeta: config.baumgarte_zeta,
        },
        ground: CompliantGround {
            penetration_allowance: config.penetration_allowance,
            damping: config.contact_damping,
            friction_velocity: config.friction_velocity,
        },
        stance: match config.contact_model {
            ContactModel::RigidHybrid => initial_stance(&model, initial, &config.terrain)?,
            ContactModel::Compliant => Stance::flight(),
        },
        events: Vec::new(),
        actuator_work: 0.0,
        contact_work: 0.0,
        grazing: None,
    };
    let mut samples = Vec::new();
    let mut state = initial.clone();
    let mut termination = Termination::Completed;
    let steps = ((config.t_final - initial.t) / config.dt - 1e-9).ceil().max(0.0) as usize;
    for k in 0..steps {
        let t_next = (initial.t + (k + 1) as f64 * config.dt).min(config.t_final);
        let command = match controller.compute(&state) {
            Ok(c) => c,
            Err(e) => {
                termination = Termination::Failed { t: state.t, reason: e.to_string() };
                break;
            }
        };
        let lambda = match config.contact_model {
            ContactModel::RigidHybrid => sim.release_pulling(&state, &command.u),
            ContactModel::Compliant => compliant_contact_force(&model, &state.q, &state.v, &config.terrain, &sim.ground)
                .map(|f| DVector::from_iterator(2 * f.len(), f.iter().flat_map(|x| [x.x, x.y]))),
        };
        let lambda = match lambda {
            Ok(l) => l,
            Err(e) => {
                termination = Termination::Failed { t: state.t, reason: e.to_string() };
                break;
            }
        };
        let u = command.u.clone();
        samples.push(Sample {
            energy: total_energy(&model, &state)?,
            state: state.clone(),
            command,
            lambda,
            contacts: match config.contact_model {
                ContactModel::RigidHybrid => sim.stance.contacts.clone(),
                ContactModel::Compliant => {
                    let pts = (0..model.contacts().len())
                        .filter(|&p| clearance(&model, &state.q, p, &config.terrain).is_ok_and(|c| c < 0.0))
                        .collect();
                    ContactSet::new(pts)?
                }
            },
            actuator_work: sim.actuator_work,
            contact_work: sim.contact_work,
        });
        state = match sim.hold(state.clone(), &u, t_next) {
            Ok(s) => RobotState { t: t_next, ..s },
            Err(e) => {
                termination = Termination::Failed { t: state.t, reason: e.to_string() };
                break;
            }
        };
        if !state.is_finite() || state.v.amax() > config.divergence_limit {
            termination = Termination::Diverged { t: state.t };
            break;
        }
        if state.q[BASE_Z] < config.min_base_height {
            termination = Termination::Fell { t: state.t };
            break;
        }
    }
    Ok(SimResult {
        samples,
        events: sim.events,
        termination,
        final_state: state,
    })
}
