//! Impact-invariant feedback control for a planar five-link biped.
//!
//! The crate covers the rigid-body model and its impact map, the
//! impact-invariant projection of joint- and task-space velocity errors, a
//! dense QP solver for operational space control, a hybrid simulator and an
//! experiment harness comparing controller variants around impacts.

pub mod control;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod impact;
pub mod linalg;
pub mod model;
pub mod projection;
pub mod qp;
pub mod sim;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{ContactSet, RobotModel, RobotState};
