//! Truncated joint pmf tables on `N^m` with a certified omitted-mass bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cells whose probability falls below this are dropped into the deficit.
pub const DROP_THRESHOLD: f64 = 1e-300;

/// Default cap on the number of dense cells a law may allocate.
pub const DEFAULT_ENTRY_BUDGET: usize = 1 << 24;

/// Joint pmf of an `N^m`-valued count vector, truncated to the box
/// `[0, cap_1] x ... x [0, cap_m]`.
///
/// Stored probabilities are lower bounds on the true cell probabilities and
/// `mass_deficit` bounds everything that was omitted (tail truncation, cap
/// overflow, underflowed cells). Storage is dense, row-major with the last
/// coordinate fastest, so memory order is lexicographic order in `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountLaw {
    caps: Vec<usize>,
    strides: Vec<usize>,
    probs: Vec<f64>,
    mass_deficit: f64,
}

fn strides_for(caps: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; caps.len()];
    for k in (0..caps.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * (caps[k + 1] + 1);
    }
    strides
}

fn box_size(caps: &[usize], budget: usize) -> Result<usize> {
    let mut size = 1usize;
    for &c in caps {
        size = size
            .checked_mul(c + 1)
            .filter(|&s| s <= budget)
            .ok_or(Error::BudgetExceeded {
                requested: usize::MAX,
                budget,
            })?;
    }
    if size > budget {
        return Err(Error::BudgetExceeded {
            requested: size,
            budget,
        });
    }
    Ok(size)
}

impl CountLaw {
    /// Point mass at the zero vector with the given per-coordinate caps.
    pub fn zero(caps: Vec<usize>) -> Result<Self> {
        Self::zero_with_budget(caps, DEFAULT_ENTRY_BUDGET)
    }

    pub fn zero_with_budget(caps: Vec<usize>, budget: usize) -> Result<Self> {
        let size = box_size(&caps, budget)?;
        let strides = strides_for(&caps);
        let mut probs = vec![0.0; size];
        probs[0] = 1.0;
        Ok(Self {
            caps,
            strides,
            probs,
            mass_deficit: 0.0,
        })
    }

    /// Point mass at `alpha`; caps default to `alpha` itself.
    pub fn point_mass(alpha: &[usize]) -> Self {
        let caps = alpha.to_vec();
        let strides = strides_for(&caps);
        let size: usize = caps.iter().map(|c| c + 1).product();
        let mut probs = vec![0.0; size];
        let idx: usize = alpha.iter().zip(&strides).map(|(a, s)| a * s).sum();
        probs[idx] = 1.0;
        Self {
            caps,
            strides,
            probs,
            mass_deficit: 0.0,
        }
    }

    /// Builds a law from explicit `(alpha, p)` entries.
    pub fn from_entries(
        m: usize,
        caps: Vec<usize>,
        entries: &[(Vec<usize>, f64)],
        mass_deficit: f64,
    ) -> Result<Self> {
        if caps.len() != m {
            return Err(Error::LengthMismatch {
                what: "caps vs m",
                left: caps.len(),
                right: m,
            });
        }
        if !(mass_deficit >= 0.0 && mass_deficit.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mass_deficit must be a finite nonnegative number, got {mass_deficit}"
            )));
        }
        let mut law = Self::zero(caps)?;
        law.probs[0] = 0.0;
        law.mass_deficit = mass_deficit;
        for (alpha, p) in entries {
            if alpha.len() != m {
                return Err(Error::ArityMismatch {
                    expected: m,
                    found: alpha.len(),
                });
            }
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidParameter(format!(
                    "probability {p} outside [0, 1]"
                )));
            }
            let idx = law.index_of(alpha).ok_or_else(|| {
                Error::InvalidParameter(format!("alpha {alpha:?} exceeds caps {:?}", law.caps))
            })?;
            law.probs[idx] += p;
        }
        Ok(law)
    }

    pub fn m(&self) -> usize {
        self.caps.len()
    }

    pub fn caps(&self) -> &[usize] {
        &self.caps
    }

    pub fn mass_deficit(&self) -> f64 {
        self.mass_deficit
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    fn index_of(&self, alpha: &[usize]) -> Option<usize> {
        if alpha.len() != self.caps.len() {
            return None;
        }
        let mut idx = 0;
        for ((&a, &c), &s) in alpha.iter().zip(&self.caps).zip(&self.strides) {
            if a > c {
                return None;
            }
            idx += a * s;
        }
        Some(idx)
    }

    fn alpha_of(&self, mut idx: usize, out: &mut [usize]) {
        for (k, &s) in self.strides.iter().enumerate() {
            out[k] = idx / s;
            idx %= s;
        }
    }

    /// Probability stored for `alpha` (zero outside the recorded box).
    pub fn prob(&self, alpha: &[usize]) -> f64 {
        self.index_of(alpha).map_or(0.0, |i| self.probs[i])
    }

    /// Nonzero entries in lexicographic order of `alpha`.
    pub fn entries(&self) -> Vec<(Vec<usize>, f64)> {
        let mut alpha = vec![0; self.m()];
        let mut out = Vec::new();
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                self.alpha_of(i, &mut alpha);
                out.push((alpha.clone(), p));
            }
        }
        out
    }

    /// Marginal pmf of coordinate `k` (lower bounds, like the table).
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.caps[k] + 1];
        let s = self.strides[k];
        let c = self.caps[k] + 1;
        for (i, &p) in self.probs.iter().enumerate() {
            out[(i / s) % c] += p;
        }
        out
    }

    /// Mean vector of the recorded entries.
    pub fn mean(&self) -> Vec<f64> {
        (0..self.m())
            .map(|k| {
                self.marginal(k)
                    .iter()
                    .enumerate()
                    .map(|(a, p)| a as f64 * p)
                    .sum()
            })
            .collect()
    }

    /// Covariance matrix of the recorded entries (treated as a distribution).
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let m = self.m();
        let mean = self.mean();
        let mut cov = vec![vec![0.0; m]; m];
        let mut alpha = vec![0; m];
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            self.alpha_of(i, &mut alpha);
            for a in 0..m {
                let da = alpha[a] as f64 - mean[a];
                for b in 0..m {
                    cov[a][b] += p * da * (alpha[b] as f64 - mean[b]);
                }
            }
        }
        cov
    }

    /// `sum_alpha exp(<s, alpha>) P(alpha)` over the recorded entries.
    pub fn mgf(&self, s: &[f64]) -> Result<f64> {
        if s.len() != self.m() {
            return Err(Error::ArityMismatch {
                expected: self.m(),
                found: s.len(),
            });
        }
        let mut alpha = vec![0; self.m()];
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            self.alpha_of(i, &mut alpha);
            let dot: f64 = alpha.iter().zip(s).map(|(&a, &sk)| a as f64 * sk).sum();
            acc += p * dot.exp();
        }
        Ok(acc)
    }

    /// Multiplies in one independent categorical site: with probability
    /// `none` nothing is added, with probability `probs[k]` coordinate `k`
    /// increases by one. Mass pushed past a cap moves to the deficit.
    pub(crate) fn push_site(&mut self, none: f64, probs: &[f64]) {
        debug_assert_eq!(probs.len(), self.m());
        if probs.iter().all(|&p| p == 0.0) {
            return;
        }
        let m = self.m();
        let mut alpha = vec![0; m];
        let mut overflow = 0.0;
        for i in (0..self.probs.len()).rev() {
            let old = self.probs[i];
            self.alpha_of(i, &mut alpha);
            let mut v = none * old;
            for k in 0..m {
                if probs[k] == 0.0 {
                    continue;
                }
                if alpha[k] == self.caps[k] {
                    overflow += probs[k] * old;
                }
                if alpha[k] > 0 {
                    v += probs[k] * self.probs[i - self.strides[k]];
                }
            }
            self.probs[i] = v;
        }
        self.mass_deficit += overflow;
    }

    /// Moves cells below [`DROP_THRESHOLD`] into the deficit.
    pub fn prune(&mut self) {
        let mut dropped = 0.0;
        for p in self.probs.iter_mut() {
            if *p > 0.0 && *p < DROP_THRESHOLD {
                dropped += *p;
                *p = 0.0;
            }
        }
        self.mass_deficit += dropped;
    }

    /// Scales every stored cell by `factor` in `[0, 1]`, moving the removed
    /// mass to the deficit.
    pub(crate) fn scale(&mut self, factor: f64) {
        let before = self.total_mass();
        for p in self.probs.iter_mut() {
            *p *= factor;
        }
        self.mass_deficit += before - self.total_mass();
    }

    /// Law of the coordinate-mapped sum of two independent vectors.
    pub fn convolve_mapped(&self, other: &CountLaw, map: &CoordinateMap) -> Result<CountLaw> {
        convolve_mapped(self, other, map)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(CountLawJson::from(self)).expect("count law serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let j: CountLawJson =
            serde_json::from_value(v.clone()).map_err(|e| Error::Config(e.to_string()))?;
        let entries: Vec<_> = j.entries.into_iter().map(|e| (e.alpha, e.p)).collect();
        Self::from_entries(j.m, j.cap, &entries, j.mass_deficit)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EntryJson {
    alpha: Vec<usize>,
    p: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CountLawJson {
    m: usize,
    entries: Vec<EntryJson>,
    mass_deficit: f64,
    cap: Vec<usize>,
}

impl From<&CountLaw> for CountLawJson {
    fn from(law: &CountLaw) -> Self {
        Self {
            m: law.m(),
            entries: law
                .entries()
                .into_iter()
                .map(|(alpha, p)| EntryJson { alpha, p })
                .collect(),
            mass_deficit: law.mass_deficit,
            cap: law.caps.clone(),
        }
    }
}

impl Serialize for CountLaw {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CountLawJson::from(self).serialize(s)
    }
}

/// Assignment of the coordinates of two source laws onto a target law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateMap {
    pub source_a: usize,
    pub source_b: usize,
    pub target: usize,
    /// `assign_a[i]` is the target coordinate that coordinate `i` of law `a` adds into.
    pub assign_a: Vec<usize>,
    pub assign_b: Vec<usize>,
}

impl CoordinateMap {
    pub fn new(target: usize, assign_a: Vec<usize>, assign_b: Vec<usize>) -> Result<Self> {
        let mut hit = vec![false; target];
        for &t in assign_a.iter().chain(&assign_b) {
            if t >= target {
                return Err(Error::InvalidParameter(format!(
                    "coordinate map sends a source coordinate to {t}, target arity is {target}"
                )));
            }
            hit[t] = true;
        }
        if let Some(t) = hit.iter().position(|h| !h) {
            return Err(Error::InvalidParameter(format!(
                "target coordinate {t} receives no source coordinate"
            )));
        }
        Ok(Self {
            source_a: assign_a.len(),
            source_b: assign_b.len(),
            target,
            assign_a,
            assign_b,
        })
    }

    /// Target of arity `m + 1` fed by a tilde law on coordinates `0..=m` (identity)
    /// and a hat law on `1..=m+1`, whose last coordinate folds into target 0.
    pub fn gap_decomposition(m: usize) -> Self {
        let assign_a = (0..=m).collect();
        let mut assign_b: Vec<usize> = (1..=m).collect();
        assign_b.push(0);
        Self::new(m + 1, assign_a, assign_b).expect("gap map is well formed")
    }

    pub fn map_a(&self, alpha: &[usize], out: &mut [usize]) {
        for (i, &a) in alpha.iter().enumerate() {
            out[self.assign_a[i]] += a;
        }
    }

    pub fn map_b(&self, alpha: &[usize], out: &mut [usize]) {
        for (i, &a) in alpha.iter().enumerate() {
            out[self.assign_b[i]] += a;
        }
    }
}

/// Law of `map_a(A) + map_b(B)` for independent `A ~ a`, `B ~ b`.
pub fn convolve_mapped(a: &CountLaw, b: &CountLaw, map: &CoordinateMap) -> Result<CountLaw> {
    if a.m() != map.source_a {
        return Err(Error::ArityMismatch {
            expected: map.source_a,
            found: a.m(),
        });
    }
    if b.m() != map.source_b {
        return Err(Error::ArityMismatch {
            expected: map.source_b,
            found: b.m(),
        });
    }
    let mut caps = vec![0usize; map.target];
    for (i, &c) in a.caps.iter().enumerate() {
        caps[map.assign_a[i]] += c;
    }
    for (i, &c) in b.caps.iter().enumerate() {
        caps[map.assign_b[i]] += c;
    }
    let mut out = CountLaw::zero(caps)?;
    out.probs[0] = 0.0;
    let ea = a.entries();
    let eb = b.entries();
    let mut target = vec![0usize; map.target];
    for (alpha_a, pa) in &ea {
        for (alpha_b, pb) in &eb {
            target.iter_mut().for_each(|t| *t = 0);
            map.map_a(alpha_a, &mut target);
            map.map_b(alpha_b, &mut target);
            let idx = out.index_of(&target).expect("caps cover the mapped box");
            out.probs[idx] += pa * pb;
        }
    }
    // P(a omitted or b omitted) for independent omissions.
    out.mass_deficit = a.mass_deficit + b.mass_deficit - a.mass_deficit * b.mass_deficit;
    out.prune();
    Ok(out)
}

/// Interval `[lo, hi]` guaranteed to contain the total-variation distance
/// between the true laws behind `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvInterval {
    pub lo: f64,
    pub hi: f64,
}

pub fn tv_distance(a: &CountLaw, b: &CountLaw) -> Result<TvInterval> {
    if a.m() != b.m() {
        return Err(Error::ArityMismatch {
            expected: a.m(),
            found: b.m(),
        });
    }
    let mut l1 = 0.0;
    for (alpha, pa) in a.entries() {
        l1 += (pa - b.prob(&alpha)).abs();
    }
    for (alpha, pb) in b.entries() {
        if a.index_of(&alpha).map_or(true, |i| a.probs[i] == 0.0) {
            l1 += pb;
        }
    }
    let core = 0.5 * l1;
    let slack = 0.5 * (a.mass_deficit + b.mass_deficit);
    Ok(TvInterval {
        lo: (core - slack).max(0.0),
        hi: (core + slack).min(1.0),
    })
}
