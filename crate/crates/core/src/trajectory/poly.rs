use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which one-sided limit to take at a breakpoint that carries a jump.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Pre,
    Post,
}

/// Value, first and second derivative.
pub type Sample = [f64; 3];

/// Scalar piecewise polynomial with local coefficients: on segment `k`,
/// `p(t) = Σ_j c[k][j] (t − b_k)^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolynomial {
    breakpoints: Vec<f64>,
    coefficients: Vec<Vec<f64>>,
}

impl PiecewisePolynomial {
    pub fn new(breakpoints: Vec<f64>, coefficients: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() < 2 || coefficients.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidTrajectory(format!(
                "{} breakpoints need {} coefficient rows, found {}",
                breakpoints.len(),
                breakpoints.len().saturating_sub(1),
                coefficients.len()
            )));
        }
        if !breakpoints.iter().all(|b| b.is_finite()) || breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidTrajectory("breakpoints must be finite and strictly increasing".into()));
        }
        if coefficients.iter().any(|c| c.is_empty() || c.iter().any(|x| !x.is_finite())) {
            return Err(Error::InvalidTrajectory("coefficient rows must be nonempty and finite".into()));
        }
        Ok(Self {
            breakpoints,
            coefficients,
        })
    }

    pub fn constant(value: f64, t0: f64, t1: f64) -> Result<Self> {
        Self::new(vec![t0, t1], vec![vec![value]])
    }

    /// Cubic Hermite interpolation through `(times, values, slopes)`.
    pub fn hermite(times: &[f64], values: &[f64], slopes: &[f64]) -> Result<Self> {
        if times.len() != values.len() || times.len() != slopes.len() {
            return Err(Error::InvalidTrajectory("hermite knot arrays differ in length".into()));
        }
        let coefficients = (0..times.len().saturating_sub(1))
            .map(|k| hermite_segment(values[k], values[k + 1], slopes[k], slopes[k + 1], times[k + 1] - times[k]).to_vec())
            .collect();
        Self::new(times.to_vec(), coefficients)
    }

    /// C2 cubic spline through the knots with prescribed end slopes.
    pub fn clamped_cubic(times: &[f64], values: &[f64], slope_start: f64, slope_end: f64) -> Result<Self> {
        let n = times.len();
        if n < 2 || values.len() != n {
            return Err(Error::InvalidTrajectory("clamped spline needs at least two matching knots".into()));
        }
        let mut slopes = vec![0.0; n];
        slopes[0] = slope_start;
        slopes[n - 1] = slope_end;
        if n > 2 {
            // second-derivative continuity at interior knots, unknown slopes
            let m = n - 2;
            let mut a = DMatrix::zeros(m, m);
            let mut rhs = DVector::zeros(m);
            for i in 1..n - 1 {
                let h0 = times[i] - times[i - 1];
                let h1 = times[i + 1] - times[i];
                let r = i - 1;
                a[(r, r)] = 2.0 / h0 + 2.0 / h1;
                if r > 0 {
                    a[(r, r - 1)] = 1.0 / h0;
                }
                if r + 1 < m {
                    a[(r, r + 1)] = 1.0 / h1;
                }
                rhs[r] = 3.0 * (values[i] - values[i - 1]) / (h0 * h0) + 3.0 * (values[i + 1] - values[i]) / (h1 * h1);
                if i == 1 {
                    rhs[r] -= slope_start / h0;
                }
                if i == n - 2 {
                    rhs[r] -= slope_end / h1;
                }
            }
            let sol = a
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::InvalidTrajectory("degenerate spline knots".into()))?;
            slopes[1..n - 1].copy_from_slice(sol.as_slice());
        }
        Self::hermite(times, values, &slopes)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().expect("at least two breakpoints")
    }

    pub fn num_segments(&self) -> usize {
        self.coefficients.len()
    }

    /// Evaluates segment `k` at absolute time `t` (extrapolating if outside).
    pub fn eval_segment(&self, k: usize, t: f64) -> Sample {
        let s = t - self.breakpoints[k];
        let c = &self.coefficients[k];
        let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
        for j in (0..c.len()).rev() {
            p = p * s + c[j];
            if j >= 1 {
                dp = dp * s + j as f64 * c[j];
            }
            if j >= 2 {
                ddp = ddp * s + (j * (j - 1)) as f64 * c[j];
            }
        }
        [p, dp, ddp]
    }

    /// Segment used at time `t`. At an interior breakpoint `Pre` selects the
    /// segment ending there and `Post` the one starting there.
    pub fn segment_index(&self, t: f64, side: Side) -> usize {
        let nseg = self.num_segments();
        // first breakpoint strictly greater than t
        let upper = self.breakpoints.partition_point(|&b| b <= t);
        let mut k = upper.saturating_sub(1).min(nseg - 1);
        if side == Side::Pre && k > 0 && t == self.breakpoints[k] {
            k -= 1;
        }
        k
    }

    pub fn eval(&self, t: f64, side: Side) -> Sample {
        self.eval_segment(self.segment_index(t, side), t)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t, Side::Post)[0]
    }
}

/// Local cubic coefficients of the Hermite segment `(p0, m0) → (p1, m1)` over `h`.
pub fn hermite_segment(p0: f64, p1: f64, m0: f64, m1: f64, h: f64) -> [f64; 4] {
    let d = (p1 - p0) / h;
    [p0, m0, (3.0 * d - 2.0 * m0 - m1) / h, (m0 + m1 - 2.0 * d) / (h * h)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_has_zero_derivatives() {
        let p = PiecewisePolynomial::constant(2.5, 0.0, 1.0).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(p.eval(t, Side::Post), [2.5, 0.0, 0.0]);
        }
    }

    #[test]
    fn hermite_reproduces_knots() {
        let times = [0.0, 0.4, 1.0];
        let values = [1.0, -2.0, 0.5];
        let slopes = [0.3, 1.5, -0.7];
        let p = PiecewisePolynomial::hermite(&times, &values, &slopes).unwrap();
        for k in 0..3 {
            for side in [Side::Pre, Side::Post] {
                let s = p.eval(times[k], side);
                assert!((s[0] - values[k]).abs() < 1e-14);
                assert!((s[1] - slopes[k]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cubic_derivatives_match_closed_form() {
        // p(t) = 1 + 2(t−1) − 3(t−1)² + 4(t−1)³ on [1, 2]
        let p = PiecewisePolynomial::new(vec![1.0, 2.0], vec![vec![1.0, 2.0, -3.0, 4.0]]).unwrap();
        let s = p.eval(1.5, Side::Post);
        assert!((s[0] - (1.0 + 1.0 - 0.75 + 0.5)).abs() < 1e-15);
        assert!((s[1] - (2.0 - 3.0 + 3.0)).abs() < 1e-15);
        assert!((s[2] - (-6.0 + 12.0)).abs() < 1e-15);
    }

    #[test]
    fn clamped_spline_is_c2() {
        let times = [0.0, 0.2, 0.5, 0.9];
        let values = [0.0, 1.0, 0.5, 2.0];
        let p = PiecewisePolynomial::clamped_cubic(&times, &values, 1.0, -1.0).unwrap();
        for &t in &times[1..3] {
            let a = p.eval(t, Side::Pre);
            let b = p.eval(t, Side::Post);
            for i in 0..3 {
                assert!((a[i] - b[i]).abs() < 1e-10, "{t} {i} {a:?} {b:?}");
            }
        }
        assert!((p.eval(0.0, Side::Post)[1] - 1.0).abs() < 1e-14);
        assert!((p.eval(0.9, Side::Pre)[1] + 1.0).abs() < 1e-13);
    }

    #[test]
    fn sides_select_segments() {
        let p = PiecewisePolynomial::new(vec![0.0, 1.0, 2.0], vec![vec![0.0, 1.0], vec![1.0, -1.0]]).unwrap();
        assert_eq!(p.eval(1.0, Side::Pre)[1], 1.0);
        assert_eq!(p.eval(1.0, Side::Post)[1], -1.0);
        assert_eq!(p.eval(2.0, Side::Post)[0], 0.0);
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(PiecewisePolynomial::new(vec![0.0, 0.0], vec![vec![1.0]]).is_err());
        assert!(PiecewisePolynomial::new(vec![0.0, 1.0], vec![]).is_err());
        assert!(PiecewisePolynomial::new(vec![0.0], vec![]).is_err());
    }
}
