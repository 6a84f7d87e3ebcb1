//! Smooth cutoffs built from `eta(u) = exp(-1/u)`.

use serde::{Deserialize, Serialize};

/// `eta(u) = exp(-1/u)` for `u > 0`, zero otherwise.
pub fn eta(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// Smooth step: 0 for `u <= 0`, 1 for `u >= 1`.
pub fn eta_hat(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = eta(u);
        a / (a + eta(1.0 - u))
    }
}

/// `(eta_hat, eta_hat', eta_hat'')` at `u`.
pub fn eta_hat_derivs(u: f64) -> (f64, f64, f64) {
    if u <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if u >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let v = 1.0 - u;
    let a = eta(u);
    let b = eta(v);
    if a + b == 0.0 {
        return (eta_hat(u), 0.0, 0.0);
    }
    let a1 = a / (u * u);
    let a2 = a * (1.0 / u.powi(4) - 2.0 / u.powi(3));
    let b1 = -b / (v * v);
    let b2 = b * (1.0 / v.powi(4) - 2.0 / v.powi(3));
    let s = a + b;
    let s1 = a1 + b1;
    let num = a1 * b - a * b1;
    let num1 = a2 * b - a * b2;
    (a / s, num / (s * s), num1 / (s * s) - 2.0 * num * s1 / (s * s * s))
}

/// Radial bump around an outpost circle: 1 on `[t - eps/2, t + eps/2]`,
/// 0 outside `[t - eps, t + eps]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub center: f64,
    pub half_width: f64,
}

impl BumpSpec {
    pub fn new(center: f64, half_width: f64) -> Self {
        Self { center, half_width }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    pub fn eval(&self, r: f64) -> f64 {
        bump(self, r)
    }
}

pub fn bump(spec: &BumpSpec, r: f64) -> f64 {
    let eps = spec.half_width;
    let half = 0.5 * eps;
    eta_hat((r - (spec.center - eps)) / half) * eta_hat(((spec.center + eps) - r) / half)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_and_support() {
        let b = BumpSpec::new(1.5, 0.1);
        assert_eq!(b.eval(1.5), 1.0);
        assert_eq!(b.eval(1.6), 0.0);
        assert_eq!(b.eval(1.45), 1.0);
        assert_eq!(b.eval(1.55), 1.0);
        assert_eq!(b.eval(1.4), 0.0);
        for i in 0..=10_000 {
            let r = 1.3 + 0.4 * i as f64 / 10_000.0;
            let v = b.eval(r);
            assert!((0.0..=1.0).contains(&v));
            if (r - 1.5).abs() <= 0.05 {
                assert_eq!(v, 1.0, "plateau at r={r}");
            }
            if (r - 1.5).abs() >= 0.1 {
                assert_eq!(v, 0.0, "support at r={r}");
            }
        }
    }

    #[test]
    fn eta_hat_derivatives_match_differences() {
        for &u in &[0.1, 0.3, 0.5, 0.77, 0.9] {
            let (_, d1, d2) = eta_hat_derivs(u);
            let h = 1e-4;
            let fd1 = (eta_hat(u + h) - eta_hat(u - h)) / (2.0 * h);
            let fd2 = (eta_hat(u + h) - 2.0 * eta_hat(u) + eta_hat(u - h)) / (h * h);
            assert!((d1 - fd1).abs() < 1e-6 * d1.abs().max(1.0), "u={u}");
            assert!((d2 - fd2).abs() < 1e-4 * d2.abs().max(1.0), "u={u}");
        }
    }
}
