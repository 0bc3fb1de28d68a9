//! Natural cubic spline interpolation with analytic first and second
//! derivatives, used for joint-space trajectory generation.

use crate::error::{Error, Result};

/// Natural cubic spline through `(t_k, y_k)` knots. Second derivatives
/// vanish at both ends; evaluation outside the knot range extrapolates the
/// boundary cubic.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    t: Vec<f64>,
    y: Vec<f64>,
    /// Second derivative at each knot (Thomas-algorithm solve).
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn fit(t: &[f64], y: &[f64]) -> Result<Self> {
        if t.len() != y.len() {
            return Err(Error::Shape {
                what: "spline knots".into(),
                expected: format!("{} ordinates", t.len()),
                got: format!("{}", y.len()),
            });
        }
        if t.len() < 2 {
            return Err(Error::Validation("spline needs at least 2 knots".into()));
        }
        if t.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Validation("spline knots must be finite".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Validation(
                "spline knots must be strictly increasing".into(),
            ));
        }

        let n = t.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives.
            let sys = n - 2;
            let mut diag = vec![0.0; sys];
            let mut upper = vec![0.0; sys];
            let mut rhs = vec![0.0; sys];
            for i in 0..sys {
                let h0 = t[i + 1] - t[i];
                let h1 = t[i + 2] - t[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h1 - (y[i + 1] - y[i]) / h0);
            }
            // Forward elimination (lower diagonal mirrors the upper one).
            for i in 1..sys {
                let lower = t[i + 1] - t[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            m[sys] = rhs[sys - 1] / diag[sys - 1];
            for i in (1..sys).rev() {
                m[i] = (rhs[i - 1] - upper[i - 1] * m[i + 1]) / diag[i - 1];
            }
        }
        Ok(CubicSpline {
            t: t.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    fn segment(&self, x: f64) -> usize {
        match self.t.binary_search_by(|k| k.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.t.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.t.len() - 2),
        }
    }

    /// Value, first derivative, and second derivative at `x`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let i = self.segment(x);
        let h = self.t[i + 1] - self.t[i];
        let a = (self.t[i + 1] - x) / h;
        let b = (x - self.t[i]) / h;
        let value = a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0;
        let deriv = (self.y[i + 1] - self.y[i]) / h
            + h / 6.0 * ((3.0 * b * b - 1.0) * self.m[i + 1] - (3.0 * a * a - 1.0) * self.m[i]);
        let second = a * self.m[i] + b * self.m[i + 1];
        (value, deriv, second)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }
}
