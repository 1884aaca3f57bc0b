use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::impact::invariant_basis;
use crate::model::{ContactSet, RobotModel, NUM_COORDINATES};

/// Generalized positions and velocities read from a time-series CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityLog {
    pub t: Vec<f64>,
    pub q: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
}

/// Reads the `t`, `q0..q6` and `v0..v6` columns of a CSV; other columns are
/// ignored.
pub fn read_velocity_log(path: &Path) -> Result<VelocityLog> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MalformedCsv(format!("{}: missing column {name}", path.display())))
    };
    let t_col = col("t")?;
    let q_cols = (0..NUM_COORDINATES).map(|i| col(&format!("q{i}"))).collect::<Result<Vec<_>>>()?;
    let v_cols = (0..NUM_COORDINATES).map(|i| col(&format!("v{i}"))).collect::<Result<Vec<_>>>()?;
    let mut log = VelocityLog {
        t: Vec::new(),
        q: Vec::new(),
        v: Vec::new(),
    };
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::MalformedCsv(format!("{}: row {}: bad number in column {}", path.display(), line + 2, &header[c])))
        };
        log.t.push(num(t_col)?);
        log.q.push(DVector::from_iterator(NUM_COORDINATES, q_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?));
        log.v.push(DVector::from_iterator(NUM_COORDINATES, v_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?));
    }
    Ok(log)
}

/// `Q(q) v` at every logged sample.
pub fn project_velocities(model: &RobotModel, log: &VelocityLog, contacts: &ContactSet) -> Result<Vec<DVector<f64>>> {
    log.q
        .iter()
        .zip(&log.v)
        .map(|(q, v)| Ok(invariant_basis(model, q, contacts)?.projector * v))
        .collect()
}

/// Total variation of coordinate `i` over samples with `t0 ≤ t ≤ tf`.
pub fn total_variation(t: &[f64], series: &[DVector<f64>], i: usize, t0: f64, tf: f64) -> f64 {
    let vals: Vec<f64> = t
        .iter()
        .zip(series)
        .filter(|(&tt, _)| tt >= t0 && tt <= tf)
        .map(|(_, v)| v[i])
        .collect();
    vals.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Projects a logged velocity series onto the impact-invariant subspace of
/// `contacts` and writes `t, v0..v6, pv0..pv6`.
pub fn project_log(model: &RobotModel, input: &Path, contacts: &ContactSet, output: &Path) -> Result<Vec<DVector<f64>>> {
    let log = read_velocity_log(input)?;
    let projected = project_velocities(model, &log, contacts)?;
    let mut w = csv::Writer::from_path(output)?;
    let mut header = vec!["t".to_string()];
    header.extend((0..NUM_COORDINATES).map(|i| format!("v{i}")));
    header.extend((0..NUM_COORDINATES).map(|i| format!("pv{i}")));
    w.write_record(&header)?;
    for ((t, v), pv) in log.t.iter().zip(&log.v).zip(&projected) {
        let mut row = vec![t.to_string()];
        row.extend(v.iter().map(f64::to_string));
        row.extend(pv.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(output, e))?;
    Ok(projected)
}
