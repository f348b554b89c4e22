//! Shape-preserving cubic spline interpolation.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplineError {
    #[error("need at least 2 knots, got {0}")]
    TooFewKnots(usize),
    #[error("knot abscissas must be strictly increasing (violation at index {0})")]
    NonIncreasingKnots(usize),
    #[error("knot coordinates must be finite")]
    NonFiniteKnot,
}

/// Monotonicity-preserving piecewise-cubic Hermite interpolant
/// (Fritsch-Carlson slopes).
///
/// C1 rather than C2, but local: a knot only influences its neighboring
/// segments, and on monotone data the interpolant is monotone with no
/// overshoot. Both properties matter when resampling sorted eigenvalues,
/// where knot spacing is extremely uneven: a globally coupled C2 spline lets
/// noise at tightly clustered knots ring across the long segments.
#[derive(Debug, Clone)]
pub struct MonotoneCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubicSpline {
    pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Self, SplineError> {
        assert_eq!(xs.len(), ys.len(), "knot coordinate lists must have equal length");
        let n = xs.len();
        if n < 2 {
            return Err(SplineError::TooFewKnots(n));
        }
        if xs.iter().chain(ys).any(|v| !v.is_finite()) {
            return Err(SplineError::NonFiniteKnot);
        }
        for i in 1..n {
            if xs[i] <= xs[i - 1] {
                return Err(SplineError::NonIncreasingKnots(i));
            }
        }

        let h: Vec<f64> = (0..n - 1).map(|i| xs[i + 1] - xs[i]).collect();
        let d: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

        let mut slopes = vec![0.0; n];
        for i in 1..n - 1 {
            if d[i - 1] * d[i] <= 0.0 {
                slopes[i] = 0.0;
            } else {
                // Brodlie's weighted harmonic mean; lies inside the
                // Fritsch-Carlson monotonicity region.
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                slopes[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        slopes[0] = edge_slope(h[0], d[0], h.get(1).copied(), d.get(1).copied());
        slopes[n - 1] = edge_slope(
            h[n - 2],
            d[n - 2],
            (n >= 3).then(|| h[n - 3]),
            (n >= 3).then(|| d[n - 3]),
        );
        Ok(Self { xs: xs.to_vec(), ys: ys.to_vec(), slopes })
    }

    /// Interpolant value at `x`; out-of-range `x` extrapolates the end cubics.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let seg = match self.xs.binary_search_by(|probe| probe.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let h = self.xs[seg + 1] - self.xs[seg];
        let t = (x - self.xs[seg]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.ys[seg]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[seg]
            + (-2.0 * t3 + 3.0 * t2) * self.ys[seg + 1]
            + (t3 - t2) * h * self.slopes[seg + 1]
    }

    /// Knot slopes, one per knot.
    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Replaces the slope at knot `i`. The caller is responsible for keeping
    /// the slope inside the monotonicity region of the adjacent segments.
    pub fn with_slope(mut self, i: usize, slope: f64) -> Self {
        self.slopes[i] = slope;
        self
    }
}

/// Shape-preserving three-point end slope (the usual PCHIP endpoint rule).
fn edge_slope(h0: f64, d0: f64, h1: Option<f64>, d1: Option<f64>) -> f64 {
    let (h1, d1) = match (h1, d1) {
        (Some(h1), Some(d1)) => (h1, d1),
        _ => return d0,
    };
    let mut m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        m = 0.0;
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        m = 3.0 * d0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_spline_reproduces_knots() {
        let xs = [0.0, 0.1, 0.12, 0.7, 0.95, 1.0];
        let ys = [0.0, 0.2, 0.25, 1.1, 1.8, 1.9];
        let s = MonotoneCubicSpline::fit(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(ys) {
            assert!((s.eval(*x) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_spline_never_overshoots_on_sorted_data() {
        // Extremely uneven spacing, like a partial spectrum's end clusters.
        let xs = [0.0, 0.01, 0.02, 0.03, 0.9, 0.95, 1.0];
        let ys = [0.0, 0.3, 0.32, 0.4, 1.5, 1.52, 2.0];
        let s = MonotoneCubicSpline::fit(&xs, &ys).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=1000 {
            let v = s.eval(i as f64 / 1000.0);
            assert!(v >= prev - 1e-12, "dip at {i}");
            assert!((0.0..=2.0).contains(&v), "overshoot {v} at {i}");
            prev = v;
        }
    }

    #[test]
    fn monotone_spline_of_two_knots_is_linear() {
        let s = MonotoneCubicSpline::fit(&[0.0, 1.0], &[0.0, 2.0]).unwrap();
        assert!((s.eval(0.25) - 0.5).abs() < 1e-14);
        assert!((s.eval(1.0 / 3.0) - 2.0 / 3.0).abs() < 1e-14);
        assert!((s.eval(0.75) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn interpolates_linear_data_exactly() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let s = MonotoneCubicSpline::fit(&xs, &ys).unwrap();
        for i in 0..=100 {
            let x = i as f64 * 0.009;
            assert!((s.eval(x) - (3.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn smooth_function_is_tracked_closely() {
        let xs: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let f = |x: f64| (2.5 * x).cos() + 0.3 * x;
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let s = MonotoneCubicSpline::fit(&xs, &ys).unwrap();
        for i in 0..=200 {
            let x = i as f64 / 200.0;
            assert!((s.eval(x) - f(x)).abs() < 1e-2, "deviation at {x}");
        }
    }

    #[test]
    fn slope_override_changes_only_adjacent_segments() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [0.0, 1.0, 1.5, 2.0];
        let base = MonotoneCubicSpline::fit(&xs, &ys).unwrap();
        let tweaked = base.clone().with_slope(3, 0.0);
        assert_eq!(base.eval(0.5), tweaked.eval(0.5));
        assert_eq!(base.eval(1.5), tweaked.eval(1.5));
        assert_ne!(base.eval(2.5), tweaked.eval(2.5));
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(matches!(
            MonotoneCubicSpline::fit(&[0.0], &[1.0]),
            Err(SplineError::TooFewKnots(1))
        ));
        assert!(matches!(
            MonotoneCubicSpline::fit(&[0.0, 0.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(SplineError::NonIncreasingKnots(1))
        ));
        assert!(MonotoneCubicSpline::fit(&[0.0, f64::NAN], &[1.0, 2.0]).is_err());
    }
}
