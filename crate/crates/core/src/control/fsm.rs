use crate::error::Result;
use crate::model::{ContactSet, RobotModel};
use crate::projection::{blend_alpha, ProjectionWindow};
use crate::trajectory::{ReferenceTrajectory, Side};

/// Snapshot of the time-based state machine.
#[derive(Debug, Clone, PartialEq)]
pub struct FsmState {
    pub mode: String,
    pub contacts: ContactSet,
    /// Nominal impact time closest to `t`, if any.
    pub t_switch: Option<f64>,
    /// Contacts gained at `t_switch`.
    pub impacting: ContactSet,
    pub in_window: bool,
    pub alpha: f64,
}

/// Mode lookup driven purely by time; actual touchdowns are never observed.
#[derive(Debug, Clone)]
pub struct Fsm {
    half_width: f64,
    tau: f64,
}

impl Fsm {
    pub fn new(half_width: f64, tau: f64) -> Result<Self> {
        ProjectionWindow::new(0.0, half_width, tau)?;
        Ok(Self { half_width, tau })
    }

    pub fn state(&self, model: &RobotModel, traj: &ReferenceTrajectory, t: f64) -> Result<FsmState> {
        // past the end of a finite schedule the final mode is held
        let t_eval = match traj.period() {
            Some(_) => t,
            None => t.clamp(traj.start(), traj.end()),
        };
        let mode = traj.mode_at(t_eval, Side::Post)?;
        let contacts = ContactSet::from_names(model, &mode.contacts)?;
        let t_switch = traj.nearest_impact(t_eval);
        let (impacting, in_window, alpha) = match t_switch {
            Some(ts) => {
                let window = ProjectionWindow::new(ts, self.half_width, self.tau)?;
                let gained = ContactSet::from_names(model, &traj.impacting_contacts(ts)?)?;
                (gained, window.contains(t), blend_alpha(t, &window))
            }
            None => (ContactSet::empty(), false, 0.0),
        };
        Ok(FsmState {
            mode: mode.name.clone(),
            contacts,
            t_switch,
            impacting,
            in_window,
            alpha,
        })
    }
}
