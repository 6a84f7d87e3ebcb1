//! Local minimisers of `g_tau(r) = q(r) - 2 tau ln r` ("local peak points"
//! of the weight `r^{2 tau n} e^{-n q}`).

use serde::Serialize;

use super::RadialPotential;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct PeakOptions {
    /// Bracketing grid density, in cells per unit radius.
    pub grid_per_unit: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub bisect_tol: f64,
    /// Probe every cell midpoint for sign changes the grid would miss.
    pub check_unresolved: bool,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            grid_per_unit: 4096.0,
            bisect_tol: 1e-13,
            check_unresolved: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub r: f64,
    pub g: f64,
    /// `g_tau''(r) = q''(r) + 2 tau / r^2`.
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakAnalysis {
    pub tau: f64,
    pub peaks: Vec<Peak>,
    /// Global minimum of `g_tau` over the peaks and the interval endpoints.
    pub b_tau: f64,
    /// `g_tau(r) < b_tau + delta_n` per peak.
    pub significant: Vec<bool>,
    pub delta_n: f64,
}

impl PeakAnalysis {
    pub fn significant_peaks(&self) -> impl Iterator<Item = &Peak> {
        self.peaks
            .iter()
            .zip(&self.significant)
            .filter_map(|(p, &s)| s.then_some(p))
    }

    /// Index of the peak with the smallest `g_tau`.
    pub fn global(&self) -> Option<&Peak> {
        self.peaks.iter().min_by(|a, b| a.g.total_cmp(&b.g))
    }
}

pub fn find_peaks(
    pot: &RadialPotential,
    tau: f64,
    interval: (f64, f64),
    n: usize,
    c: f64,
) -> Result<PeakAnalysis> {
    find_peaks_with(pot, tau, interval, n, c, PeakOptions::default())
}

/// Roots of `r q'(r) = 2 tau` where `g_tau` turns from decreasing to
/// increasing, bracketed on a uniform grid and refined by bisection.
pub fn find_peaks_with(
    pot: &RadialPotential,
    tau: f64,
    interval: (f64, f64),
    n: usize,
    c: f64,
    opts: PeakOptions,
) -> Result<PeakAnalysis> {
    let (lo, hi) = interval;
    let (wlo, whi) = pot.smooth_window();
    if !(lo < hi && lo >= wlo && hi <= whi && lo > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "peak interval [{lo}, {hi}] must be a nonempty subset of (0, {whi}]"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be >= 2, got {n}")));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {c}")));
    }
    let slope = |r: f64| r * pot.dq(r) - 2.0 * tau;
    let cells = ((hi - lo) * opts.grid_per_unit).ceil().max(1.0) as usize;
    let node = |i: usize| {
        if i == cells {
            hi
        } else {
            lo + (hi - lo) * i as f64 / cells as f64
        }
    };
    let mut peaks = Vec::new();
    let mut left = slope(lo);
    for i in 0..cells {
        let (a, b) = (node(i), node(i + 1));
        let right = slope(b);
        if left < 0.0 && right >= 0.0 {
            let r = bisect(&slope, a, b, opts.bisect_tol);
            let (_, _, d2) = pot.eval(r);
            peaks.push(Peak {
                r,
                g: pot.g_tau(tau, r),
                curvature: d2 + 2.0 * tau / (r * r),
            });
        } else if opts.check_unresolved && (left < 0.0) == (right < 0.0) {
            let mid = slope(0.5 * (a + b));
            if (mid < 0.0) != (left < 0.0) {
                return Err(Error::GridTooCoarse(format!(
                    "two roots of r q'(r) = 2 tau inside [{a}, {b}] at tau = {tau}"
                )));
            }
        }
        left = right;
    }
    let endpoint_min = pot.g_tau(tau, lo).min(pot.g_tau(tau, hi));
    let b_tau = peaks.iter().map(|p| p.g).fold(endpoint_min, f64::min);
    let delta_n = c * (n as f64).ln() / n as f64;
    let significant = peaks.iter().map(|p| p.g < b_tau + delta_n).collect();
    Ok(PeakAnalysis {
        tau,
        peaks,
        b_tau,
        significant,
        delta_n,
    })
}

/// Bisection for an increasing sign change of `f` on `[a, b]`.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
