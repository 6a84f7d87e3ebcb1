//! Exact finite-n computations for rotation-invariant ensembles.
//!
//! For `Q(z) = q(|z|)` the moduli `|z_j|` are independent, index `j` having
//! density proportional to `r^{2j+1} e^{-n q(r)}` on `(0, inf)`. Every
//! quantity here reduces to one-dimensional integrals of that weight, which
//! are evaluated with the peak of `phi_j(r) = (2j+1) ln r - n q(r)` subtracted.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::count_law::CountLaw;
use crate::error::{Error, Result};
use crate::heine::{caps_from_marginals, SiteDistribution};
use crate::quadrature::{gk15, integrate, Tolerance};
use crate::radial::bump::eta_hat;
use crate::radial::{find_peaks_with, BumpSpec, PeakOptions, RadialPotential};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadMode {
    /// Integrate only over windows around the significant peaks.
    Windowed,
    /// Integrate over `[0, R_max]`.
    Full,
    /// Both, failing unless they agree to `1e-8` relative.
    Both,
}

impl FromStr for QuadMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "windowed" => Ok(QuadMode::Windowed),
            "full" => Ok(QuadMode::Full),
            "both" => Ok(QuadMode::Both),
            other => Err(Error::Config(format!(
                "unknown quadrature mode `{other}` (expected windowed, full or both)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// `C` in `eps_n = sqrt(C ln n / n)` and in the significance threshold.
    pub window_constant: f64,
    pub mode: QuadMode,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            window_constant: 10.0,
            mode: QuadMode::Windowed,
            max_subdivisions: 4000,
        }
    }
}

/// Relative agreement demanded of the two modes under [`QuadMode::Both`].
pub const MODE_AGREEMENT: f64 = 1e-8;

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quadrature tolerances must be positive (rel {}, abs {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.window_constant >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "window constant C must be >= 1, got {}",
                self.window_constant
            )));
        }
        if self.max_subdivisions < 16 {
            return Err(Error::InvalidParameter("max_subdivisions must be >= 16".into()));
        }
        Ok(())
    }

    fn tolerance(&self) -> Tolerance {
        Tolerance {
            rel: self.rel_tol,
            abs: self.abs_tol,
            max_subdivisions: self.max_subdivisions,
        }
    }
}

/// One radial statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Region {
    /// Indicator of `[lo, hi]`.
    Interval { lo: f64, hi: f64 },
    /// Smooth cutoff: 1 on `[lo, hi]`, 0 outside `[lo - ramp, hi + ramp]`,
    /// with `eta_hat` ramps.
    Smooth { lo: f64, hi: f64, ramp: f64 },
}

impl Region {
    /// The outpost bump `h` for `spec`.
    pub fn bump(spec: BumpSpec) -> Self {
        let half = 0.5 * spec.half_width;
        Region::Smooth {
            lo: spec.center - half,
            hi: spec.center + half,
            ramp: half,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            Region::Interval { lo, hi } => (lo, hi),
            Region::Smooth { lo, hi, ramp } => (lo - ramp, hi + ramp),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            Region::Interval { lo, hi } => {
                if r >= lo && r <= hi {
                    1.0
                } else {
                    0.0
                }
            }
            Region::Smooth { lo, hi, ramp } => {
                eta_hat((r - (lo - ramp)) / ramp) * eta_hat(((hi + ramp) - r) / ramp)
            }
        }
    }

    fn is_hard(&self) -> bool {
        matches!(self, Region::Interval { .. })
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Region::Interval { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Region::Smooth { lo, hi, ramp } => {
                lo.is_finite() && hi.is_finite() && ramp.is_finite() && lo <= hi && ramp > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("malformed region {self:?}")))
        }
    }
}

/// Coordinate `coordinate` is measured with `region` for indices `j < below`
/// instead of its default region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexSplit {
    pub coordinate: usize,
    pub below: usize,
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Hard,
    Smooth,
}

/// The statistics `h_1, ..., h_m` whose joint law is studied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    pub regions: Vec<Region>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<IndexSplit>,
}

/// `min gap between adjacent special radii / 5`.
pub fn default_epsilon(special: &[f64]) -> f64 {
    special
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
        / 5.0
}

impl RegionSet {
    pub fn new(regions: Vec<Region>) -> Result<Self> {
        let set = Self {
            regions,
            split: None,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn with_split(regions: Vec<Region>, split: IndexSplit) -> Result<Self> {
        let set = Self {
            regions,
            split: Some(split),
        };
        set.validate()?;
        Ok(set)
    }

    pub fn empty() -> Self {
        Self {
            regions: Vec::new(),
            split: None,
        }
    }

    /// Hard intervals `[t_k - eps, t_k + eps]`.
    pub fn outposts_hard(t: &[f64], eps: f64) -> Result<Self> {
        Self::new(
            t.iter()
                .map(|&c| Region::Interval {
                    lo: c - eps,
                    hi: c + eps,
                })
                .collect(),
        )
    }

    /// Bumps of half-width `eps` centred on the outposts.
    pub fn outposts_smooth(t: &[f64], eps: f64) -> Result<Self> {
        Self::new(t.iter().map(|&c| Region::bump(BumpSpec::new(c, eps))).collect())
    }

    /// Gap statistics: coordinate 0 counts indices `j >= m0` found inside
    /// `[0, t_1 - eps]` and indices `j < m0` found in `[t_m + eps, r_max]`;
    /// coordinates `1..=m` count the outposts.
    pub fn gap_hard(t: &[f64], eps: f64, m0: usize, r_max: f64) -> Result<Self> {
        let first = t[0];
        let last = t[t.len() - 1];
        let mut regions = vec![Region::Interval {
            lo: 0.0,
            hi: first - eps,
        }];
        regions.extend(t.iter().map(|&c| Region::Interval {
            lo: c - eps,
            hi: c + eps,
        }));
        Self::with_split(
            regions,
            IndexSplit {
                coordinate: 0,
                below: m0,
                region: Region::Interval {
                    lo: last + eps,
                    hi: r_max,
                },
            },
        )
    }

    /// Smooth counterpart of [`gap_hard`](Self::gap_hard): coordinate 0 is 1
    /// on `[0, t_1 - 2 eps]` (resp. `[t_m + 2 eps, inf)`) and vanishes within
    /// `eps` of the first (resp. last) outpost.
    pub fn gap_smooth(t: &[f64], eps: f64, m0: usize, r_max: f64) -> Result<Self> {
        let first = t[0];
        let last = t[t.len() - 1];
        let mut regions = vec![Region::Smooth {
            lo: -eps,
            hi: first - 2.0 * eps,
            ramp: eps,
        }];
        regions.extend(t.iter().map(|&c| Region::bump(BumpSpec::new(c, eps))));
        Self::with_split(
            regions,
            IndexSplit {
                coordinate: 0,
                below: m0,
                region: Region::Smooth {
                    lo: last + 2.0 * eps,
                    hi: r_max + 2.0 * eps,
                    ramp: eps,
                },
            },
        )
    }

    pub fn m(&self) -> usize {
        self.regions.len()
    }

    pub fn kind(&self) -> RegionKind {
        let split_hard = self.split.map_or(true, |s| s.region.is_hard());
        if self.regions.iter().all(Region::is_hard) && split_hard {
            RegionKind::Hard
        } else {
            RegionKind::Smooth
        }
    }

    /// Region measuring coordinate `k` for index `j`.
    pub fn region(&self, k: usize, j: usize) -> &Region {
        match &self.split {
            Some(s) if s.coordinate == k && j < s.below => &s.region,
            _ => &self.regions[k],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.regions {
            r.validate()?;
        }
        let mut layouts = vec![self.regions.clone()];
        if let Some(s) = &self.split {
            s.region.validate()?;
            if s.coordinate >= self.m() {
                return Err(Error::InvalidParameter(format!(
                    "split coordinate {} out of range for {} regions",
                    s.coordinate,
                    self.m()
                )));
            }
            let mut alt = self.regions.clone();
            alt[s.coordinate] = s.region;
            layouts.push(alt);
        }
        for layout in layouts {
            let mut supports: Vec<(usize, (f64, f64))> =
                layout.iter().map(Region::support).enumerate().collect();
            supports.sort_by(|a, b| a.1 .0.total_cmp(&b.1 .0));
            for w in supports.windows(2) {
                if w[1].1 .0 < w[0].1 .1 {
                    return Err(Error::WindowOverlap {
                        first: w[0].0.min(w[1].0),
                        second: w[0].0.max(w[1].0),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Per-index geometry: peaks of `phi_j` and the log-normaliser.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteGeometry {
    pub j: usize,
    /// All local maximisers of `phi_j`, increasing.
    pub peaks: Vec<f64>,
    /// Merged integration windows around the significant peaks.
    pub windows: Vec<(f64, f64)>,
    /// `max phi_j` over the significant peaks.
    pub phi_max: f64,
    /// `ln 2 int_0^inf r^{2j+1} e^{-n q} dr`.
    pub log_norm: f64,
}

fn phi(pot: &RadialPotential, n: usize, j: usize, r: f64) -> f64 {
    (2 * j + 1) as f64 * r.ln() - n as f64 * pot.q(r)
}

fn uniform_breaks(lo: f64, hi: f64, panels: usize) -> Vec<f64> {
    (0..=panels)
        .map(|i| lo + (hi - lo) * i as f64 / panels as f64)
        .collect()
}

fn with_points(mut breaks: Vec<f64>, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let (lo, hi) = (breaks[0], breaks[breaks.len() - 1]);
    breaks.extend(extra.into_iter().filter(|&x| x > lo && x < hi));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks
}

const FULL_PANELS: usize = 256;

impl SiteGeometry {
    pub fn new(pot: &RadialPotential, n: usize, j: usize, cfg: &QuadratureConfig) -> Result<Self> {
        if j >= n {
            return Err(Error::InvalidParameter(format!("index j = {j} must be < n = {n}")));
        }
        let r_max = pot.r_max();
        let tau = (j as f64 + 0.5) / n as f64;
        let pa = find_peaks_with(
            pot,
            tau,
            (1e-6, r_max),
            n.max(2),
            cfg.window_constant,
            PeakOptions::default(),
        )?;
        let nf = n as f64;
        let eps_n = pa.delta_n.sqrt();
        let mut windows: Vec<(f64, f64)> = Vec::new();
        let mut phi_max = f64::NEG_INFINITY;
        for p in pa.significant_peaks() {
            let lap = p.curvature / 4.0;
            let hw = eps_n.max(8.0 / (nf * lap).sqrt());
            windows.push(((p.r - hw).max(0.0), (p.r + hw).min(r_max)));
            phi_max = phi_max.max(phi(pot, n, j, p.r));
        }
        if windows.is_empty() {
            return Err(Error::NoPeak { tau });
        }
        windows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for w in windows {
            match merged.last_mut() {
                Some(last) if w.0 <= last.1 => last.1 = last.1.max(w.1),
                _ => merged.push(w),
            }
        }
        let mut geo = Self {
            j,
            peaks: pa.peaks.iter().map(|p| p.r).collect(),
            windows: merged,
            phi_max,
            log_norm: 0.0,
        };
        geo.log_norm = geo.log_integral(pot, n, &[], &RegionSet::empty(), cfg)?;
        Ok(geo)
    }

    fn breaks(&self, r_max: f64, mode: QuadMode, stats: &RegionSet) -> Vec<Vec<f64>> {
        let edges: Vec<f64> = (0..stats.m())
            .flat_map(|k| {
                let (a, b) = stats.region(k, self.j).support();
                [a, b]
            })
            .chain(self.peaks.iter().copied())
            .collect();
        match mode {
            QuadMode::Full => vec![with_points(uniform_breaks(0.0, r_max, FULL_PANELS), edges)],
            _ => self
                .windows
                .iter()
                .map(|&(a, b)| with_points(vec![a, b], edges.iter().copied()))
                .collect(),
        }
    }

    fn log_integral_mode(
        &self,
        pot: &RadialPotential,
        n: usize,
        s: &[f64],
        stats: &RegionSet,
        cfg: &QuadratureConfig,
        mode: QuadMode,
    ) -> Result<f64> {
        let j = self.j;
        let f = |r: f64| {
            let mut e = phi(pot, n, j, r) - self.phi_max;
            for (k, &sk) in s.iter().enumerate() {
                if sk != 0.0 {
                    e += sk * stats.region(k, j).eval(r);
                }
            }
            e.exp()
        };
        let mut total = 0.0;
        for b in self.breaks(pot.r_max(), mode, stats) {
            total += integrate(&f, &b, cfg.tolerance())?.value;
        }
        if !(total > 0.0) {
            return Err(Error::Quadrature(format!("vanishing integral for index {j}")));
        }
        Ok(std::f64::consts::LN_2 + self.phi_max + total.ln())
    }

    fn log_integral(
        &self,
        pot: &RadialPotential,
        n: usize,
        s: &[f64],
        stats: &RegionSet,
        cfg: &QuadratureConfig,
    ) -> Result<f64> {
        match cfg.mode {
            QuadMode::Both => {
                let a = self.log_integral_mode(pot, n, s, stats, cfg, QuadMode::Windowed)?;
                let b = self.log_integral_mode(pot, n, s, stats, cfg, QuadMode::Full)?;
                let rel = (a - b).exp_m1().abs();
                if rel > MODE_AGREEMENT {
                    return Err(Error::Quadrature(format!(
                        "windowed and full quadrature disagree at index {}: relative difference {rel:e}",
                        self.j
                    )));
                }
                Ok(a)
            }
            mode => self.log_integral_mode(pot, n, s, stats, cfg, mode),
        }
    }

    /// `max phi_j` over `[a, b]`.
    fn local_max(&self, pot: &RadialPotential, n: usize, a: f64, b: f64) -> f64 {
        let j = self.j;
        let a = a.max(1e-300);
        self.peaks
            .iter()
            .filter(|&&p| p > a && p < b)
            .map(|&p| phi(pot, n, j, p))
            .fold(phi(pot, n, j, a).max(phi(pot, n, j, b)), f64::max)
    }

    /// `2 int_a^b r^{2j+1} e^{-nq} g(r) dr / Z_j` for a sign-definite `g`.
    fn weighted_fraction<G: Fn(f64) -> f64>(
        &self,
        pot: &RadialPotential,
        n: usize,
        a: f64,
        b: f64,
        g: G,
        cfg: &QuadratureConfig,
    ) -> Result<f64> {
        let (a, b) = (a.max(0.0), b.min(pot.r_max()));
        if b <= a {
            return Ok(0.0);
        }
        let peak = self.local_max(pot, n, a, b);
        let log_scale = std::f64::consts::LN_2 + peak - self.log_norm;
        if log_scale < -700.0 {
            return Ok(0.0);
        }
        let j = self.j;
        let f = |r: f64| (phi(pot, n, j, r) - peak).exp() * g(r);
        let breaks = with_points(
            uniform_breaks(a, b, 8),
            self.peaks.iter().copied(),
        );
        let v = integrate(&f, &breaks, cfg.tolerance())?.value;
        Ok(log_scale.exp() * v)
    }

    /// `ln E[e^{sum_k s_k h_k(r_j)}]` for this index.
    fn log_site_mgf(
        &self,
        pot: &RadialPotential,
        n: usize,
        s: &[f64],
        stats: &RegionSet,
        cfg: &QuadratureConfig,
    ) -> Result<f64> {
        let mut acc = 0.0;
        for (k, &sk) in s.iter().enumerate() {
            if sk == 0.0 {
                continue;
            }
            let region = *stats.region(k, self.j);
            let (a, b) = region.support();
            acc += self.weighted_fraction(pot, n, a, b, |r| (sk * region.eval(r)).exp_m1(), cfg)?;
        }
        Ok(acc.ln_1p())
    }

    /// Probability that `r_j` lands in each region.
    fn region_probabilities(
        &self,
        pot: &RadialPotential,
        n: usize,
        regions: &RegionSet,
        cfg: &QuadratureConfig,
    ) -> Result<Vec<f64>> {
        (0..regions.m())
            .map(|k| {
                let (a, b) = regions.region(k, self.j).support();
                self.weighted_fraction(pot, n, a, b, |_| 1.0, cfg)
            })
            .collect()
    }
}

fn check_stats(s: &[f64], stats: &RegionSet) -> Result<()> {
    if s.len() != stats.m() {
        return Err(Error::ArityMismatch {
            expected: stats.m(),
            found: s.len(),
        });
    }
    if let Some((k, v)) = s.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("s[{k}] = {v} is not finite")));
    }
    Ok(())
}

/// Precomputed per-index geometry for one `(pot, n, cfg)`; reuse it across
/// many statistics and `s` values.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    pot: &'a RadialPotential,
    n: usize,
    cfg: QuadratureConfig,
    sites: Vec<SiteGeometry>,
}

impl<'a> Engine<'a> {
    pub fn new(pot: &'a RadialPotential, n: usize, cfg: QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        if n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        let sites = (0..n)
            .into_par_iter()
            .map(|j| SiteGeometry::new(pot, n, j, &cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pot, n, cfg, sites })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.cfg
    }

    pub fn site(&self, j: usize) -> &SiteGeometry {
        &self.sites[j]
    }

    /// `ln 2 int r^{2j+1} e^{sum s_k h_k} e^{-n q} dr`.
    pub fn log_norm(&self, j: usize, s: &[f64], stats: &RegionSet) -> Result<f64> {
        check_stats(s, stats)?;
        let site = self.sites.get(j).ok_or_else(|| {
            Error::InvalidParameter(format!("index j = {j} must be < n = {}", self.n))
        })?;
        if s.iter().all(|&v| v == 0.0) {
            return Ok(site.log_norm);
        }
        site.log_integral(self.pot, self.n, s, stats, &self.cfg)
    }

    /// `ln E[exp(sum_k s_k sum_j h_k(r_j))]`.
    pub fn log_joint_mgf(&self, s: &[f64], stats: &RegionSet) -> Result<f64> {
        check_stats(s, stats)?;
        stats.validate()?;
        let bound = (self.n as f64).ln();
        if let Some((k, v)) = s.iter().enumerate().find(|(_, v)| v.abs() > bound) {
            return Err(Error::InvalidParameter(format!(
                "|s[{k}]| = {} exceeds ln n = {bound}",
                v.abs()
            )));
        }
        if s.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let terms = self
            .sites
            .par_iter()
            .map(|site| site.log_site_mgf(self.pot, self.n, s, stats, &self.cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(terms.iter().sum())
    }

    pub fn joint_mgf(&self, s: &[f64], stats: &RegionSet) -> Result<f64> {
        Ok(self.log_joint_mgf(s, stats)?.exp())
    }

    pub fn region_probabilities(&self, j: usize, regions: &RegionSet) -> Result<Vec<f64>> {
        if regions.kind() != RegionKind::Hard {
            return Err(Error::InvalidParameter(
                "region probabilities need hard-indicator regions".into(),
            ));
        }
        regions.validate()?;
        let site = self.sites.get(j).ok_or_else(|| {
            Error::InvalidParameter(format!("index j = {j} must be < n = {}", self.n))
        })?;
        site.region_probabilities(self.pot, self.n, regions, &self.cfg)
    }

    /// Site laws `(P(no region), P(region 1), ...)` for every index.
    pub fn site_distributions(&self, regions: &RegionSet) -> Result<Vec<SiteDistribution>> {
        (0..self.n)
            .into_par_iter()
            .map(|j| {
                let mut p = self.region_probabilities(j, regions)?;
                let total: f64 = p.iter().sum();
                if total > 1.0 {
                    p.iter_mut().for_each(|x| *x /= total);
                }
                let mut probs = vec![(1.0 - p.iter().sum::<f64>()).max(0.0)];
                probs.extend(p);
                Ok(SiteDistribution { j, probs })
            })
            .collect()
    }

    /// Exact law of the region counts: a multivariate Poisson-binomial over
    /// `j = 0..n-1`. Without explicit caps, each cap is chosen so its
    /// marginal overflow is below `1e-13`.
    pub fn exact_count_law(&self, regions: &RegionSet, cap: Option<&[usize]>) -> Result<CountLaw> {
        let sites = self.site_distributions(regions)?;
        let m = regions.m();
        let caps = match cap {
            Some(c) if c.len() != m => {
                return Err(Error::LengthMismatch {
                    what: "cap vs regions",
                    left: c.len(),
                    right: m,
                })
            }
            Some(c) => c.to_vec(),
            None => caps_from_marginals(&sites, m, 1e-13 / m.max(1) as f64),
        };
        let mut law = CountLaw::zero(caps)?;
        for site in &sites {
            law.push_site(site.empty(), site.occupied());
        }
        Ok(law)
    }

    pub fn sampler(&self) -> Result<ModuliSampler> {
        let tables = self
            .sites
            .par_iter()
            .map(|site| InverseCdf::new(self.pot, self.n, site))
            .collect::<Result<Vec<_>>>()?;
        Ok(ModuliSampler { n: self.n, tables })
    }
}

/// `ln 2 int_0^inf r^{2j+1} e^{sum_k s_k h_k(r)} e^{-n q(r)} dr`.
pub fn log_norm(
    pot: &RadialPotential,
    n: usize,
    j: usize,
    s: &[f64],
    stats: &RegionSet,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    cfg.validate()?;
    check_stats(s, stats)?;
    let site = SiteGeometry::new(pot, n, j, cfg)?;
    if s.iter().all(|&v| v == 0.0) {
        return Ok(site.log_norm);
    }
    site.log_integral(pot, n, s, stats, cfg)
}

/// `E[exp(sum_k s_k sum_j h_k(r_j))]`, the product over `j` of norm ratios.
pub fn joint_mgf(
    pot: &RadialPotential,
    n: usize,
    s: &[f64],
    stats: &RegionSet,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    check_stats(s, stats)?;
    if s.iter().all(|&v| v == 0.0) {
        return Ok(1.0);
    }
    Engine::new(pot, n, *cfg)?.joint_mgf(s, stats)
}

pub fn region_probabilities(
    pot: &RadialPotential,
    n: usize,
    j: usize,
    regions: &RegionSet,
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if regions.kind() != RegionKind::Hard {
        return Err(Error::InvalidParameter(
            "region probabilities need hard-indicator regions".into(),
        ));
    }
    regions.validate()?;
    if regions.m() == 0 {
        return Ok(Vec::new());
    }
    SiteGeometry::new(pot, n, j, cfg)?.region_probabilities(pot, n, regions, cfg)
}

pub fn exact_count_law(
    pot: &RadialPotential,
    n: usize,
    regions: &RegionSet,
    cap: Option<&[usize]>,
    cfg: &QuadratureConfig,
) -> Result<CountLaw> {
    Engine::new(pot, n, *cfg)?.exact_count_law(regions, cap)
}

/// One draw of all `n` moduli.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModuliSample {
    pub n: usize,
    pub radii: Vec<f64>,
    pub seed: u64,
}

impl ModuliSample {
    /// CSV with header `j,r`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,r\n");
        for (j, r) in self.radii.iter().enumerate() {
            out.push_str(&format!("{j},{r:.17e}\n"));
        }
        out
    }

    /// Count of radii in each region (index-dependent regions honoured).
    pub fn counts(&self, regions: &RegionSet) -> Vec<usize> {
        let mut c = vec![0; regions.m()];
        for (j, &r) in self.radii.iter().enumerate() {
            for (k, slot) in c.iter_mut().enumerate() {
                if regions.region(k, j).eval(r) > 0.5 {
                    *slot += 1;
                }
            }
        }
        c
    }
}

/// Largest CDF increment allowed per cell.
const MAX_CELL_MASS: f64 = 1e-3;
const MAX_CELLS: usize = 1 << 20;

/// Tabulated CDF of one modulus, inverted by cubic Hermite interpolation.
#[derive(Debug, Clone)]
struct InverseCdf {
    r: Vec<f64>,
    cdf: Vec<f64>,
    density: Vec<f64>,
}

impl InverseCdf {
    fn new(pot: &RadialPotential, n: usize, site: &SiteGeometry) -> Result<Self> {
        let j = site.j;
        let f = |r: f64| (phi(pot, n, j, r) - site.phi_max).exp();
        let expected = (site.log_norm - std::f64::consts::LN_2 - site.phi_max).exp();
        let mut stack: Vec<(f64, f64)> = Vec::new();
        for &(a, b) in site.windows.iter().rev() {
            let pts = with_points(uniform_breaks(a, b, 64), site.peaks.iter().copied());
            for w in pts.windows(2).rev() {
                stack.push((w[0], w[1]));
            }
        }
        let mut cells: Vec<(f64, f64, f64)> = Vec::new();
        while let Some((a, b)) = stack.pop() {
            let (v, e) = gk15(&f, a, b);
            let mid = 0.5 * (a + b);
            if (v > MAX_CELL_MASS * expected || e > 1e-13 * expected) && mid > a && mid < b {
                if cells.len() + stack.len() > MAX_CELLS {
                    return Err(Error::SamplerGrid {
                        j,
                        detail: format!("more than {MAX_CELLS} cells required"),
                    });
                }
                stack.push((mid, b));
                stack.push((a, mid));
            } else {
                cells.push((a, b, v));
            }
        }
        let total: f64 = cells.iter().map(|c| c.2).sum();
        if !(total > 0.0) || ((total / expected) - 1.0).abs() > 1e-6 {
            return Err(Error::SamplerGrid {
                j,
                detail: format!("tabulated mass {total:e} vs normaliser {expected:e}"),
            });
        }
        let mut r = Vec::with_capacity(cells.len() + 1);
        let mut cdf = Vec::with_capacity(cells.len() + 1);
        let mut acc = 0.0;
        r.push(cells[0].0);
        cdf.push(0.0);
        for &(a, b, v) in &cells {
            if a != *r.last().unwrap() {
                // gap between windows carries no mass
                r.push(a);
                cdf.push(acc / total);
            }
            acc += v;
            r.push(b);
            cdf.push(acc / total);
        }
        *cdf.last_mut().unwrap() = 1.0;
        let density = r.iter().map(|&x| f(x) / total).collect();
        Ok(Self { r, cdf, density })
    }

    fn invert(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1) - 1;
        let (r0, r1) = (self.r[i], self.r[i + 1]);
        let (f0, f1) = (self.cdf[i], self.cdf[i + 1]);
        if f1 <= f0 {
            return r0;
        }
        let h = r1 - r0;
        let (d0, d1) = (self.density[i] * h, self.density[i + 1] * h);
        let hermite = |t: f64| {
            let t2 = t * t;
            let t3 = t2 * t;
            (2.0 * t3 - 3.0 * t2 + 1.0) * f0
                + (t3 - 2.0 * t2 + t) * d0
                + (-2.0 * t3 + 3.0 * t2) * f1
                + (t3 - t2) * d1
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut t = (u - f0) / (f1 - f0);
        for _ in 0..80 {
            let v = hermite(t);
            if (v - u).abs() <= 1e-10 * (f1 - f0).min(1.0) {
                break;
            }
            if v < u {
                lo = t;
            } else {
                hi = t;
            }
            t = 0.5 * (lo + hi);
        }
        r0 + t * h
    }
}

/// Inverse-CDF tables for every index, built once per `(pot, n)`.
#[derive(Debug, Clone)]
pub struct ModuliSampler {
    n: usize,
    tables: Vec<InverseCdf>,
}

impl ModuliSampler {
    /// Index `j` draws from stream `j` of a ChaCha8 generator keyed by `seed`.
    pub fn sample(&self, seed: u64) -> ModuliSample {
        let radii = self
            .tables
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(j as u64);
                t.invert(rng.random())
            })
            .collect();
        ModuliSample {
            n: self.n,
            radii,
            seed,
        }
    }

    /// Grid size of index `j`.
    pub fn cells(&self, j: usize) -> usize {
        self.tables[j].r.len() - 1
    }

    /// Largest CDF increment over all cells and indices.
    pub fn max_cell_mass(&self) -> f64 {
        self.tables
            .iter()
            .flat_map(|t| t.cdf.windows(2).map(|w| w[1] - w[0]))
            .fold(0.0, f64::max)
    }
}

pub fn sample_moduli(
    pot: &RadialPotential,
    n: usize,
    seed: u64,
    cfg: &QuadratureConfig,
) -> Result<ModuliSample> {
    Ok(Engine::new(pot, n, *cfg)?.sampler()?.sample(seed))
}
