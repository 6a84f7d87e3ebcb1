//! Rotation-invariant external potentials `Q(z) = q(|z|)` and the radial
//! obstacle-problem diagnostics built on them.

mod builders;
pub mod bump;
mod classify;
mod peaks;

pub use builders::{build_case1, build_case1_with_margin, build_case2, validate_potential_checks, Case2Args, CheckResult};
pub use bump::{bump, BumpSpec};
pub use classify::{classify, CaseTag, ClassifyOptions, DropletData};
pub use peaks::{find_peaks, find_peaks_with, Peak, PeakAnalysis, PeakOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use bump::eta_hat_derivs;

/// Builder provenance, echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "lowercase")]
pub enum PotentialLabel {
    Ginibre,
    Case1 {
        t: Vec<f64>,
        w: Vec<f64>,
    },
    Case2 {
        components: [[f64; 2]; 2],
        m0: f64,
        t: Vec<f64>,
        w: Vec<f64>,
    },
}

/// Exponential bump `zeta(u) = exp(1 - 1/(1 - u^2))` on `|u| < 1`, returned
/// as `(1 - zeta, zeta', zeta'')`; `1 - zeta` is computed without cancellation.
fn zeta_window(u: f64) -> (f64, f64, f64) {
    if u.abs() >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let v = 1.0 - u * u;
    let f = -u * u / v;
    let z = f.exp();
    let f1 = -2.0 * u / (v * v);
    let f2 = -2.0 / (v * v) - 8.0 * u * u / (v * v * v);
    (-f.exp_m1(), z * f1, z * (f2 + f1 * f1))
}

/// `W = 1 - sum_k zeta((r - t_k)/w_k)` and its first two derivatives.
/// Windows are disjoint, so at most one term is active.
fn window_product(r: f64, outposts: &[(f64, f64)]) -> (f64, f64, f64) {
    for &(t, w) in outposts {
        let u = (r - t) / w;
        if u.abs() < 1.0 {
            let (one_minus, z1, z2) = zeta_window(u);
            return (one_minus, -z1 / w, -z2 / (w * w));
        }
    }
    (1.0, 0.0, 0.0)
}

/// `omega ((r^2 - c^2) - 2 c^2 ln(r/c))`: how far a constant-density
/// profile rises above its harmonic continuation from radius `c`.
fn density_excess(r: f64, c: f64, omega: f64) -> (f64, f64, f64) {
    let c2 = c * c;
    (
        omega * ((r * r - c2) - 2.0 * c2 * (r / c).ln()),
        omega * (2.0 * r - 2.0 * c2 / r),
        omega * (2.0 + 2.0 * c2 / (r * r)),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Case2Profile {
    pub b0: f64,
    pub a1: f64,
    pub b1: f64,
    pub m0: f64,
    pub omega0: f64,
    pub omega1: f64,
    pub outposts: Vec<(f64, f64)>,
}

impl Case2Profile {
    fn obstacle(&self, r: f64) -> (f64, f64, f64) {
        (
            self.omega0 * self.b0 * self.b0 + 2.0 * self.m0 * (r / self.b0).ln(),
            2.0 * self.m0 / r,
            -2.0 * self.m0 / (r * r),
        )
    }

    /// Nonnegative gap barrier, vanishing to second order only at `b0` and `a1`.
    fn barrier(&self, r: f64) -> (f64, f64, f64) {
        let width = self.a1 - self.b0;
        let (s, s1, s2) = eta_hat_derivs((r - self.b0) / width);
        let (s1, s2) = (s1 / width, s2 / (width * width));
        let (di, di1, di2) = density_excess(r, self.b0, self.omega0);
        let (dout, dout1, dout2) = density_excess(r, self.a1, self.omega1);
        (
            (1.0 - s) * di + s * dout,
            (1.0 - s) * di1 + s * dout1 + s1 * (dout - di),
            (1.0 - s) * di2 + s * dout2 + 2.0 * s1 * (dout1 - di1) + s2 * (dout - di),
        )
    }

    fn eval(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.b0 {
            let w = self.omega0;
            return (w * r * r, 2.0 * w * r, 2.0 * w);
        }
        let (c, c1, c2) = self.obstacle(r);
        if r >= self.a1 {
            let (d, d1, d2) = density_excess(r, self.a1, self.omega1);
            return (c + d, c1 + d1, c2 + d2);
        }
        let (b, b1, b2) = self.barrier(r);
        let (w, w1, w2) = window_product(r, &self.outposts);
        (
            c + b * w,
            c1 + b1 * w + b * w1,
            c2 + b2 * w + 2.0 * b1 * w1 + b * w2,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Profile {
    Ginibre,
    /// `r^2` with exponential-bump dips down to `1 + 2 ln r` at each outpost.
    Case1 { outposts: Vec<(f64, f64)> },
    Case2(Case2Profile),
}

impl Profile {
    fn eval(&self, r: f64) -> (f64, f64, f64) {
        match self {
            Profile::Ginibre => (r * r, 2.0 * r, 2.0),
            Profile::Case1 { outposts } => {
                let (q, q1, q2) = (r * r, 2.0 * r, 2.0);
                if r <= 1.0 || r >= 3.0 {
                    return (q, q1, q2);
                }
                // Q = Qcheck + (r^2 - Qcheck) W
                let (d, d1, d2) = density_excess(r, 1.0, 1.0);
                let (w, w1, w2) = window_product(r, outposts);
                let (c, c1, c2) = (1.0 + 2.0 * r.ln(), 2.0 / r, -2.0 / (r * r));
                (c + d * w, c1 + d1 * w + d * w1, c2 + d2 * w + 2.0 * d1 * w1 + d * w2)
            }
            Profile::Case2(p) => p.eval(r),
        }
    }
}

/// A radial profile with analytic first and second derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPotential {
    profile: Profile,
    smooth_window: (f64, f64),
    r_max: f64,
    label: PotentialLabel,
}

/// Smallest radius considered by grid scans; the profiles are even and
/// smooth at the origin so nothing of interest happens below it.
pub const R_MIN: f64 = 1e-9;

impl RadialPotential {
    /// `q(r) = r^2`, the Ginibre ensemble.
    pub fn ginibre() -> Self {
        Self {
            profile: Profile::Ginibre,
            smooth_window: (0.0, 5.0),
            r_max: 5.0,
            label: PotentialLabel::Ginibre,
        }
    }

    pub(crate) fn from_profile(profile: Profile, r_max: f64, label: PotentialLabel) -> Self {
        Self {
            profile,
            smooth_window: (0.0, r_max),
            r_max,
            label,
        }
    }

    pub fn label(&self) -> &PotentialLabel {
        &self.label
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn smooth_window(&self) -> (f64, f64) {
        self.smooth_window
    }

    /// `(q, q', q'')` at `r`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        self.profile.eval(r)
    }

    pub fn q(&self, r: f64) -> f64 {
        self.eval(r).0
    }

    pub fn dq(&self, r: f64) -> f64 {
        self.eval(r).1
    }

    pub fn ddq(&self, r: f64) -> f64 {
        self.eval(r).2
    }

    /// Quarter Laplacian `(q'' + q'/r) / 4` of the radial potential.
    pub fn laplacian(&self, r: f64) -> Result<f64> {
        let (lo, hi) = self.smooth_window;
        if !(r >= lo && r <= hi) || !r.is_finite() {
            return Err(Error::OutsideSmoothWindow { r, lo, hi });
        }
        let (_, d1, d2) = self.eval(r);
        if r < 1e-8 {
            // removable singularity: q'(r)/r -> q''(0) for even profiles
            return Ok(d2 / 2.0);
        }
        Ok((d2 + d1 / r) / 4.0)
    }

    /// `g_tau(r) = q(r) - 2 tau ln r`.
    pub fn g_tau(&self, tau: f64, r: f64) -> f64 {
        self.q(r) - 2.0 * tau * r.ln()
    }
}

/// Free-function form of [`RadialPotential::laplacian`].
pub fn laplacian(pot: &RadialPotential, r: f64) -> Result<f64> {
    pot.laplacian(r)
}

/// Free-function form of [`RadialPotential::g_tau`].
pub fn g_tau(pot: &RadialPotential, tau: f64, r: f64) -> f64 {
    pot.g_tau(tau, r)
}
