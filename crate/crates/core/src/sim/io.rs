use std::io::Write;

use super::{EventKind, SimResult};
use crate::error::{Error, Result};
use crate::model::{RobotModel, NUM_COORDINATES};

/// Position and velocity error column labels for every output that appears
/// in the log, in order of first appearance.
fn error_labels(result: &SimResult) -> Vec<(String, usize)> {
    let mut labels: Vec<(String, usize)> = Vec::new();
    for s in &result.samples {
        for o in &s.command.outputs {
            if !labels.iter().any(|(n, _)| n == &o.name) {
                labels.push((o.name.clone(), o.position.len()));
            }
        }
    }
    labels
}

fn component_names(name: &str, dim: usize) -> Vec<String> {
    match dim {
        1 => vec![name.to_string()],
        2 => vec![format!("{name}_x"), format!("{name}_z")],
        _ => (0..dim).map(|i| format!("{name}_{i}")).collect(),
    }
}

/// Column order: `t, q0..q6, v0..v6, u0..u3, lam0..lam{2p-1}, mode`, then
/// `err_<output>` (position error) and `derr_<output>` (velocity error) per
/// output component. 2D outputs use `_x` and `_z` suffixes.
pub fn timeseries_header(model: &RobotModel, result: &SimResult) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((0..NUM_COORDINATES).map(|i| format!("q{i}")));
    h.extend((0..NUM_COORDINATES).map(|i| format!("v{i}")));
    h.extend((0..model.num_actuators()).map(|i| format!("u{i}")));
    h.extend((0..2 * model.contacts().len()).map(|i| format!("lam{i}")));
    h.push("mode".into());
    for (name, dim) in error_labels(result) {
        for c in component_names(&name, dim) {
            h.push(format!("err_{c}"));
            h.push(format!("derr_{c}"));
        }
    }
    h
}

/// Writes the time series; outputs inactive at a sample leave empty cells.
pub fn write_timeseries<W: Write>(model: &RobotModel, result: &SimResult, out: W) -> Result<()> {
    let labels = error_labels(result);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(timeseries_header(model, result))?;
    for s in &result.samples {
        let mut row: Vec<String> = vec![s.state.t.to_string()];
        row.extend(s.state.q.iter().map(f64::to_string));
        row.extend(s.state.v.iter().map(f64::to_string));
        row.extend(s.command.u.iter().map(f64::to_string));
        row.extend(s.lambda.iter().map(f64::to_string));
        row.push(s.command.mode.clone());
        for (name, dim) in &labels {
            match s.command.outputs.iter().find(|o| &o.name == name) {
                Some(o) => {
                    for i in 0..*dim {
                        row.push(o.position[i].to_string());
                        row.push(o.velocity[i].to_string());
                    }
                }
                None => row.extend(std::iter::repeat_n(String::new(), 2 * dim)),
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("csv output", e))?;
    Ok(())
}

pub fn events_header() -> Vec<&'static str> {
    vec!["t", "kind", "contact", "impact_set", "impulse", "ke_pre", "ke_post", "post_contact_velocity"]
}

/// One row per event; the impulse is space separated, (x, z) per point.
pub fn write_events<W: Write>(model: &RobotModel, result: &SimResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(events_header())?;
    for e in &result.events {
        let kind = match e.kind {
            EventKind::Touchdown => "touchdown",
            EventKind::ContactStart => "contact_start",
            EventKind::Liftoff => "liftoff",
        };
        w.write_record([
            e.t.to_string(),
            kind.to_string(),
            model.contacts()[e.contact].name.clone(),
            e.impact_set.names(model).join(" "),
            e.impulse.iter().map(f64::to_string).collect::<Vec<_>>().join(" "),
            e.ke_pre.to_string(),
            e.ke_post.to_string(),
            e.post_contact_velocity.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("csv output", e))?;
    Ok(())
}
