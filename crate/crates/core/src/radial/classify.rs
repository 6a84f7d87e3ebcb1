//! Droplet / outpost classification by sweeping the global minimiser of
//! `g_tau` over `tau in (0, 1]`.
//!
//! For a radial potential the minimiser `r(tau)` of `g_tau` moves
//! continuously through each droplet component and jumps across a gap at a
//! branching value `tau*`, where the inner edge, any outposts in the gap, and
//! the outer edge are simultaneous global minimisers. `tau*` equals the mass
//! enclosed by the inner component.

use serde::{Deserialize, Serialize};

use super::peaks::{bisect, find_peaks_with, PeakOptions};
use super::RadialPotential;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseTag {
    /// One component with outposts outside it.
    Case1,
    /// Two components with outposts inside the gap.
    Case2,
    /// No outposts at all.
    None,
    Other,
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CaseTag::Case1 => "case1",
            CaseTag::Case2 => "case2",
            CaseTag::None => "none",
            CaseTag::Other => "other",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropletData {
    /// Radial intervals `[a_nu, b_nu]`, increasing.
    pub components: Vec<[f64; 2]>,
    /// Outpost radii `t_p`, increasing.
    pub outposts: Vec<f64>,
    /// Cumulative equilibrium mass of `{|z| <= b_nu}`.
    pub masses: Vec<f64>,
    pub case_tag: CaseTag,
}

impl DropletData {
    pub fn b0(&self) -> f64 {
        self.components[0][1]
    }

    /// Inner edge of the second component, if any.
    pub fn a1(&self) -> Option<f64> {
        self.components.get(1).map(|c| c[0])
    }

    pub fn m0(&self) -> f64 {
        self.masses[0]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClassifyOptions {
    /// Number of `tau` values in the sweep.
    pub n_probe: usize,
    pub grid_per_unit: f64,
    /// Two minimisers are simultaneous when their `g_tau` differ by less.
    pub branch_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            n_probe: 400,
            grid_per_unit: 2048.0,
            branch_tol: 1e-9,
        }
    }
}

struct Grid {
    r: Vec<f64>,
    q: Vec<f64>,
    ln_r: Vec<f64>,
    h: f64,
}

impl Grid {
    fn new(pot: &RadialPotential, lo: f64, hi: f64, per_unit: f64) -> Self {
        let cells = ((hi - lo) * per_unit).ceil() as usize;
        let r: Vec<f64> = (0..=cells)
            .map(|i| lo + (hi - lo) * i as f64 / cells as f64)
            .collect();
        let q = r.iter().map(|&x| pot.q(x)).collect();
        let ln_r = r.iter().map(|x| x.ln()).collect();
        Self {
            r,
            q,
            ln_r,
            h: (hi - lo) / cells as f64,
        }
    }

    fn argmin(&self, tau: f64) -> usize {
        let mut best = 0;
        let mut best_g = f64::INFINITY;
        for i in 0..self.r.len() {
            let g = self.q[i] - 2.0 * tau * self.ln_r[i];
            if g < best_g {
                best_g = g;
                best = i;
            }
        }
        best
    }

    /// True if `g_tau` has an interior local maximum strictly between nodes `i` and `k`.
    fn has_barrier(&self, tau: f64, i: usize, k: usize) -> bool {
        let (i, k) = (i.min(k), i.max(k));
        let g = |x: usize| self.q[x] - 2.0 * tau * self.ln_r[x];
        let mut rising = false;
        for x in i..k {
            let d = g(x + 1) - g(x);
            if d > 0.0 {
                rising = true;
            } else if d < 0.0 && rising {
                return true;
            }
        }
        false
    }
}

/// Local minimiser of `g_tau` in the basin containing `r0`.
fn local_min_near(pot: &RadialPotential, tau: f64, r0: f64, step: f64, lo: f64, hi: f64) -> f64 {
    let slope = |r: f64| r * pot.dq(r) - 2.0 * tau;
    let (mut a, mut b) = (r0, r0);
    if slope(r0) < 0.0 {
        while slope(b) < 0.0 {
            a = b;
            b = (b + step).min(hi);
            if b >= hi {
                return hi;
            }
        }
    } else {
        while slope(a) >= 0.0 {
            b = a;
            a = (a - step).max(lo);
            if a <= lo {
                return lo;
            }
        }
    }
    bisect(&slope, a, b, 1e-14)
}

/// Sweeps `tau` and reports components, outposts and enclosed masses.
pub fn classify(pot: &RadialPotential, opts: ClassifyOptions) -> Result<DropletData> {
    let lo = 1e-6;
    let hi = pot.r_max();
    let grid = Grid::new(pot, lo, hi, opts.grid_per_unit);
    let step = grid.h;

    // a_0: minimiser of q itself
    let i0 = grid.argmin(0.0);
    let a0 = if i0 == 0 {
        0.0
    } else {
        local_min_near(pot, 0.0, grid.r[i0], step, lo, hi)
    };

    let n_probe = opts.n_probe.max(4);
    let taus: Vec<f64> = (0..n_probe)
        .map(|i| (i as f64 + 0.5) / n_probe as f64)
        .collect();
    let idx: Vec<usize> = taus.iter().map(|&t| grid.argmin(t)).collect();

    let mut components = Vec::new();
    let mut outposts = Vec::new();
    let mut branch_taus = Vec::new();
    let mut start = a0;
    for i in 0..n_probe - 1 {
        if !grid.has_barrier(taus[i], idx[i], idx[i + 1]) {
            continue;
        }
        let (rl0, rr0) = (grid.r[idx[i]], grid.r[idx[i + 1]]);
        let rl = |t: f64| local_min_near(pot, t, rl0, step, lo, hi);
        let rr = |t: f64| local_min_near(pot, t, rr0, step, lo, hi);
        let diff = |t: f64| pot.g_tau(t, rl(t)) - pot.g_tau(t, rr(t));
        let (mut ta, mut tb) = (taus[i], taus[i + 1]);
        if !(diff(ta) <= 0.0 && diff(tb) >= 0.0) {
            return Err(Error::AmbiguousClassification(format!(
                "minimiser jumps between tau = {ta} and {tb} but the branches do not cross"
            )));
        }
        for _ in 0..200 {
            let tm = 0.5 * (ta + tb);
            if tm <= ta || tm >= tb {
                break;
            }
            if diff(tm) <= 0.0 {
                ta = tm;
            } else {
                tb = tm;
            }
        }
        let tau_star = 0.5 * (ta + tb);
        let (b, a_next) = (rl(tau_star), rr(tau_star));
        components.push([start, b]);
        branch_taus.push(tau_star);
        outposts.extend(coincident_peaks(pot, tau_star, b, a_next, opts)?);
        start = a_next;
    }
    let b_last = local_min_near(pot, 1.0, grid.r[idx[n_probe - 1]], step, lo, hi);
    components.push([start, b_last]);
    outposts.extend(coincident_peaks(pot, 1.0, b_last, hi, opts)?);

    // masses from 2 int Delta Q r dr over the components
    let density = |r: f64| {
        let (_, d1, d2) = pot.eval(r);
        0.5 * (d2 * r + d1)
    };
    let tol = Tolerance {
        rel: 1e-13,
        abs: 1e-15,
        max_subdivisions: 2000,
    };
    let mut masses = Vec::with_capacity(components.len());
    let mut acc = 0.0;
    for c in &components {
        acc += integrate(&density, &[c[0], c[1]], tol)?.value;
        masses.push(acc);
    }
    if (acc - 1.0).abs() > 1e-6 {
        return Err(Error::AmbiguousClassification(format!(
            "components carry total mass {acc}, expected 1"
        )));
    }
    for (m, t) in masses.iter().zip(&branch_taus) {
        if (m - t).abs() > 1e-6 {
            return Err(Error::AmbiguousClassification(format!(
                "enclosed mass {m} disagrees with branching value {t}"
            )));
        }
    }

    let case_tag = if outposts.is_empty() {
        CaseTag::None
    } else if components.len() == 1 {
        CaseTag::Case1
    } else if components.len() == 2 && outposts.iter().all(|&t| t < components[1][0]) {
        CaseTag::Case2
    } else {
        CaseTag::Other
    };
    Ok(DropletData {
        components,
        outposts,
        masses,
        case_tag,
    })
}

/// Peaks strictly between `left` and `right` whose `g_tau` ties the global minimum.
fn coincident_peaks(
    pot: &RadialPotential,
    tau: f64,
    left: f64,
    right: f64,
    opts: ClassifyOptions,
) -> Result<Vec<f64>> {
    let peak_opts = PeakOptions {
        grid_per_unit: opts.grid_per_unit,
        ..PeakOptions::default()
    };
    let pa = find_peaks_with(pot, tau, (1e-6, pot.r_max()), 2, 1.0, peak_opts)?;
    let sep = 4.0 / opts.grid_per_unit;
    Ok(pa
        .peaks
        .iter()
        .filter(|p| p.r > left + sep && p.r < right - sep && p.g - pa.b_tau < opts.branch_tol)
        .map(|p| p.r)
        .collect())
}
