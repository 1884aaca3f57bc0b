use nalgebra::DVector;

use crate::control::{ControllerSpec, OutputDef};
use crate::error::{Error, Result};
use crate::sim::SimResult;
use crate::trajectory::{ReferenceTrajectory, Side};

/// Vertical base error that maps to unit acceleration error.
pub const JACC_REFERENCE_ERROR: f64 = 0.07;
/// Samples taken around the requested time for the acceleration error.
pub const JACC_SAMPLES: usize = 5;
/// Half spread of those samples (s).
pub const JACC_SPREAD: f64 = 0.002;

/// Trapezoidal integral of `f` over the logged samples in `[t0, tf]`, with
/// linear interpolation at the window edges.
pub fn integrate_window(times: &[f64], values: &[f64], t0: f64, tf: f64) -> Result<f64> {
    if !(tf > t0) || times.len() < 2 || t0 < times[0] - 1e-12 || tf > times[times.len() - 1] + 1e-12 {
        return Err(Error::EmptyWindow { t0, tf });
    }
    let interp = |t: f64| {
        let k = times.partition_point(|&x| x <= t).clamp(1, times.len() - 1);
        let (ta, tb) = (times[k - 1], times[k]);
        let s = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        values[k - 1] + s * (values[k] - values[k - 1])
    };
    let mut pts: Vec<(f64, f64)> = vec![(t0, interp(t0))];
    pts.extend(times.iter().zip(values).filter(|(&t, _)| t > t0 && t < tf).map(|(&t, &v)| (t, v)));
    pts.push((tf, interp(tf)));
    Ok(pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[1].1 + w[0].1)).sum())
}

/// Control effort `∫ Σ u² dt` over `[t0, tf]`.
pub fn metric_jmot(result: &SimResult, t0: f64, tf: f64) -> Result<f64> {
    let times = result.times();
    let usq: Vec<f64> = result.samples.iter().map(|s| s.command.u.norm_squared()).collect();
    integrate_window(&times, &usq, t0, tf)
}

/// Weighted acceleration error of the named outputs at one logged sample,
/// `Σ ÿ_errᵀ W ÿ_err` with `ÿ_err = K_p ỹ + K_d ẏ̃`.
pub fn acceleration_error(defs: &[&OutputDef], errors: &[(DVector<f64>, DVector<f64>)]) -> f64 {
    defs.iter()
        .zip(errors)
        .map(|(d, (e, de))| (0..d.dim()).map(|i| d.weight[i] * (d.kp[i] * e[i] + d.kd[i] * de[i]).powi(2)).sum::<f64>())
        .sum()
}

/// Normalizer turning a pure `JACC_REFERENCE_ERROR` error on `base_output`
/// into unit acceleration error.
pub fn jacc_normalization(spec: &ControllerSpec, base_output: &str) -> Result<f64> {
    let d = spec
        .outputs
        .iter()
        .find(|o| o.name == base_output)
        .ok_or_else(|| Error::UnknownOutput(base_output.to_string()))?;
    Ok(d.weight[0] * (d.kp[0] * JACC_REFERENCE_ERROR).powi(2))
}

/// Median normalized acceleration error over `JACC_SAMPLES` logged samples
/// spread evenly over `t_sample ± JACC_SPREAD`.
pub fn metric_jacc(result: &SimResult, spec: &ControllerSpec, outputs: &[&str], t_sample: f64, normalization: f64) -> Result<f64> {
    let times = result.times();
    let (first, last) = match (times.first(), times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::EmptyWindow { t0: t_sample, tf: t_sample }),
    };
    if t_sample - JACC_SPREAD < first - 1e-12 || t_sample + JACC_SPREAD > last + 1e-12 {
        return Err(Error::OutOfRange { t: t_sample, start: first, end: last });
    }
    let defs: Vec<&OutputDef> = outputs
        .iter()
        .map(|n| spec.outputs.iter().find(|o| &o.name == n).ok_or_else(|| Error::UnknownOutput(n.to_string())))
        .collect::<Result<_>>()?;
    let mut vals = Vec::with_capacity(JACC_SAMPLES);
    for k in 0..JACC_SAMPLES {
        let t = t_sample - JACC_SPREAD + 2.0 * JACC_SPREAD * k as f64 / (JACC_SAMPLES - 1) as f64;
        let i = times.partition_point(|&x| x < t).min(times.len() - 1);
        let i = if i > 0 && (times[i - 1] - t).abs() < (times[i] - t).abs() { i - 1 } else { i };
        let cmd = &result.samples[i].command;
        let errs = outputs
            .iter()
            .map(|n| {
                cmd.outputs
                    .iter()
                    .find(|o| &o.name == n)
                    .map(|o| (o.position.clone(), o.velocity.clone()))
                    .ok_or_else(|| Error::UnknownOutput(format!("{n} not active at t = {}", cmd.t)))
            })
            .collect::<Result<Vec<_>>>()?;
        vals.push(acceleration_error(&defs, &errs) / normalization);
    }
    vals.sort_by(f64::total_cmp);
    Ok(vals[JACC_SAMPLES / 2])
}

/// `∫ ‖v_ref − v‖₂ dt` over the given coordinates and `[t0, tf]`.
pub fn integrated_velocity_error(
    result: &SimResult,
    traj: &ReferenceTrajectory,
    coordinates: &[usize],
    t0: f64,
    tf: f64,
) -> Result<f64> {
    let times = result.times();
    let errs = result
        .samples
        .iter()
        .map(|s| {
            let (_, v_ref, _) = traj.eval_coordinates(s.state.t, Side::Post)?;
            Ok(coordinates.iter().map(|&c| (v_ref[c] - s.state.v[c]).powi(2)).sum::<f64>().sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    integrate_window(&times, &errs, t0, tf)
}
