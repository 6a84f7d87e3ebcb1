//! The multi-dimensional Heine distribution.
//!
//! `He(theta_1..theta_m; q_1..q_m)` is the law of the occupation counts
//! `X_k = #{j >= 0 : Y_j = k}` of independent categorical sites `Y_j` with
//! odds `theta_k q_k^j` against the empty outcome. Everything here works
//! from that site representation: the pmf table is a sequential DP over
//! sites, the point formula sums over disjoint index-set families, and the
//! moments are Bernoulli-sum series.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::count_law::{CountLaw, DEFAULT_ENTRY_BUDGET};
use crate::error::{Error, Result};

/// Truncation for series that must converge "to machine precision".
pub const SERIES_TAIL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeineParams {
    thetas: Vec<f64>,
    qs: Vec<f64>,
}

/// Law of a single site `Y_j`: `probs[0]` is the empty outcome and
/// `probs[k]` the probability of landing in coordinate `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteDistribution {
    pub j: usize,
    pub probs: Vec<f64>,
}

impl SiteDistribution {
    pub fn empty(&self) -> f64 {
        self.probs[0]
    }

    pub fn occupied(&self) -> &[f64] {
        &self.probs[1..]
    }
}

/// `P(X = alpha)` from the index-set formula, with a bound on what the
/// truncation to finitely many sites left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointProbability {
    pub p: f64,
    pub error_bound: f64,
}

/// Output of [`HeineParams::sample`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeineSamples {
    pub samples: Vec<Vec<usize>>,
    /// Last site index drawn.
    pub j_max: usize,
    /// Total-variation distance between the truncated and the exact law.
    pub tv_bound: f64,
    pub seed: u64,
}

/// Validates and builds Heine parameters. No clamping is ever applied.
pub fn validate_params(thetas: &[f64], qs: &[f64]) -> Result<HeineParams> {
    HeineParams::new(thetas.to_vec(), qs.to_vec())
}

impl HeineParams {
    pub fn new(thetas: Vec<f64>, qs: Vec<f64>) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one coordinate is required".into(),
            ));
        }
        if thetas.len() != qs.len() {
            return Err(Error::LengthMismatch {
                what: "thetas vs qs",
                left: thetas.len(),
                right: qs.len(),
            });
        }
        for (index, &value) in thetas.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "theta[{index}] is not finite"
                )));
            }
            if value <= 0.0 {
                return Err(Error::ThetaNotPositive { index, value });
            }
        }
        for (index, &value) in qs.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::InvalidParameter(format!("q[{index}] is not finite")));
            }
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::QOutOfRange { index, value });
            }
        }
        Ok(Self { thetas, qs })
    }

    pub fn m(&self) -> usize {
        self.thetas.len()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn qs(&self) -> &[f64] {
        &self.qs
    }

    /// `theta_k q_k^j`, evaluated in log space.
    fn odds(&self, k: usize, j: usize) -> f64 {
        (self.thetas[k].ln() + j as f64 * self.qs[k].ln()).exp()
    }

    fn odds_sum(&self, j: usize) -> f64 {
        (0..self.m()).map(|k| self.odds(k, j)).sum()
    }

    pub fn site_probabilities(&self, j: usize) -> SiteDistribution {
        let odds: Vec<f64> = (0..self.m()).map(|k| self.odds(k, j)).collect();
        let z = 1.0 + odds.iter().sum::<f64>();
        let mut probs = Vec::with_capacity(self.m() + 1);
        probs.push(1.0 / z);
        probs.extend(odds.iter().map(|o| o / z));
        SiteDistribution { j, probs }
    }

    /// `sum_k theta_k q_k^{J+1} / (1 - q_k)`, a bound on the probability that
    /// any site beyond `J` is occupied.
    pub fn tail_bound(&self, last_site: usize) -> f64 {
        (0..self.m())
            .map(|k| self.odds(k, last_site + 1) / (1.0 - self.qs[k]))
            .sum()
    }

    /// Smallest `J` with [`tail_bound`](Self::tail_bound)`(J) < tol`.
    pub fn last_site(&self, tol: f64) -> usize {
        // the bound is geometric; start from the slowest coordinate's estimate
        let mut j = 0usize;
        while self.tail_bound(j) >= tol {
            j += 1;
        }
        j
    }

    /// `ln prod_{j >= from} (1 + sum_k theta_k q_k^j)`.
    fn log_normalizer_from(&self, from: usize) -> f64 {
        let mut acc = 0.0;
        let mut j = from;
        loop {
            let a = self.odds_sum(j);
            acc += a.ln_1p();
            if self.tail_bound(j) < 1e-17 {
                break;
            }
            j += 1;
        }
        acc
    }

    /// Joint pmf table by dynamic programming over sites `0..=J`.
    ///
    /// `J` is chosen so the geometric tail bound is below `tail_tol / 2`;
    /// per-coordinate caps are chosen from the exact Poisson-binomial
    /// marginals so that cap overflow is below `tail_tol / 2`.
    pub fn pmf_table(&self, tail_tol: f64) -> Result<CountLaw> {
        self.pmf_table_with_budget(tail_tol, DEFAULT_ENTRY_BUDGET)
    }

    pub fn pmf_table_with_budget(&self, tail_tol: f64, budget: usize) -> Result<CountLaw> {
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tail_tol must lie in (0, 1), got {tail_tol}"
            )));
        }
        let last = self.last_site(tail_tol / 2.0);
        let sites: Vec<SiteDistribution> = (0..=last).map(|j| self.site_probabilities(j)).collect();
        let caps = caps_from_marginals(&sites, self.m(), tail_tol / (2.0 * self.m() as f64));
        let mut law = CountLaw::zero_with_budget(caps, budget)?;
        for site in &sites {
            law.push_site(site.empty(), site.occupied());
        }
        // every site beyond `last` must be empty
        let log_tail_empty = -self.log_normalizer_from(last + 1);
        law.scale(log_tail_empty.exp());
        law.prune();
        Ok(law)
    }

    /// `P(X = alpha)` by summing `prod_k q_k^{sum J_k}` over disjoint index
    /// sets `J_1..J_m` of sizes `alpha_k` drawn from `{0..=J}`.
    ///
    /// The family sum is organised site by site with memoisation on the
    /// remaining counts, so its cost is `(J + 1) prod_k (alpha_k + 1)`.
    pub fn pmf_point(&self, alpha: &[usize], tail_tol: f64) -> Result<PointProbability> {
        self.pmf_point_with_budget(alpha, tail_tol, 50_000_000)
    }

    pub fn pmf_point_with_budget(
        &self,
        alpha: &[usize],
        tail_tol: f64,
        budget: usize,
    ) -> Result<PointProbability> {
        if alpha.len() != self.m() {
            return Err(Error::ArityMismatch {
                expected: self.m(),
                found: alpha.len(),
            });
        }
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tail_tol must lie in (0, 1), got {tail_tol}"
            )));
        }
        let last = self.last_site(tail_tol);
        let box_states: usize = alpha.iter().map(|a| a + 1).product();
        let states = box_states.saturating_mul(last + 1);
        if states > budget {
            return Err(Error::EnumerationBudget { states, budget });
        }
        let m = self.m();
        let mut strides = vec![1usize; m];
        for k in (0..m.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * (alpha[k + 1] + 1);
        }
        // families[r] = sum over disjoint families in sites (j..=last) with
        // sizes r of prod_k q_k^{sum of indices}; built from j = last down.
        let mut families = vec![0.0; box_states];
        families[0] = 1.0;
        let mut r = vec![0usize; m];
        for j in (0..=last).rev() {
            let qj: Vec<f64> = self.qs.iter().map(|q| (j as f64 * q.ln()).exp()).collect();
            for idx in (0..box_states).rev() {
                let mut rem = idx;
                for k in 0..m {
                    r[k] = rem / strides[k];
                    rem %= strides[k];
                }
                let mut v = families[idx];
                for k in 0..m {
                    if r[k] > 0 {
                        v += qj[k] * families[idx - strides[k]];
                    }
                }
                families[idx] = v;
            }
        }
        let log_theta: f64 = alpha
            .iter()
            .zip(&self.thetas)
            .map(|(&a, t)| a as f64 * t.ln())
            .sum();
        let log_z = self.log_normalizer_from(0);
        let p = families[box_states - 1] * (log_theta - log_z).exp();
        Ok(PointProbability {
            p,
            error_bound: self.tail_bound(last),
        })
    }

    /// `E[exp(<s, X>)] = prod_j (1 + sum_k e^{s_k} theta_k q_k^j) / (1 + sum_k theta_k q_k^j)`.
    pub fn mgf(&self, s: &[f64]) -> Result<f64> {
        Ok(self.log_mgf(s)?.exp())
    }

    pub fn log_mgf(&self, s: &[f64]) -> Result<f64> {
        if s.len() != self.m() {
            return Err(Error::ArityMismatch {
                expected: self.m(),
                found: s.len(),
            });
        }
        for (index, &value) in s.iter().enumerate() {
            if value.is_nan() {
                return Err(Error::InvalidParameter(format!("s[{index}] is NaN")));
            }
            if value > 700.0 {
                return Err(Error::Overflow { index, value });
            }
        }
        let es: Vec<f64> = s.iter().map(|x| x.exp()).collect();
        let mut acc = 0.0;
        let mut j = 0usize;
        loop {
            let mut num = 0.0;
            let mut den = 0.0;
            for k in 0..self.m() {
                let o = self.odds(k, j);
                num += es[k] * o;
                den += o;
            }
            acc += num.ln_1p() - den.ln_1p();
            // |ln(1+a) - ln(1+b)| <= |a - b|, summed geometrically
            let tail: f64 = (0..self.m())
                .map(|k| self.odds(k, j + 1) * (es[k] - 1.0).abs() / (1.0 - self.qs[k]))
                .sum();
            if tail < SERIES_TAIL {
                break;
            }
            j += 1;
        }
        Ok(acc)
    }

    fn series_last_site(&self) -> usize {
        self.last_site(SERIES_TAIL)
    }

    /// `E[X_k] = sum_j p_{j,k}`.
    pub fn mean_vector(&self) -> Vec<f64> {
        let last = self.series_last_site();
        let mut mean = vec![0.0; self.m()];
        for j in 0..=last {
            let site = self.site_probabilities(j);
            for (acc, p) in mean.iter_mut().zip(site.occupied()) {
                *acc += p;
            }
        }
        mean
    }

    /// `Var[X_k] = sum_j p_{j,k} (1 - p_{j,k})`.
    pub fn variance_vector(&self) -> Vec<f64> {
        let last = self.series_last_site();
        let mut var = vec![0.0; self.m()];
        for j in 0..=last {
            let site = self.site_probabilities(j);
            for (acc, p) in var.iter_mut().zip(site.occupied()) {
                *acc += p * (1.0 - p);
            }
        }
        var
    }

    /// `Cov(X_a, X_b) = -sum_j p_{j,a} p_{j,b}` for `a != b` (0-based).
    pub fn covariance(&self, a: usize, b: usize) -> Result<f64> {
        if a >= self.m() || b >= self.m() {
            return Err(Error::InvalidParameter(format!(
                "coordinates ({a}, {b}) out of range for m = {}",
                self.m()
            )));
        }
        if a == b {
            return Err(Error::InvalidParameter(
                "covariance needs distinct coordinates; use variance_vector".into(),
            ));
        }
        let last = self.series_last_site();
        Ok(-(0..=last)
            .map(|j| {
                let site = self.site_probabilities(j);
                site.probs[a + 1] * site.probs[b + 1]
            })
            .sum::<f64>())
    }

    /// Full covariance matrix (variances on the diagonal).
    pub fn covariance_matrix(&self) -> Vec<Vec<f64>> {
        let var = self.variance_vector();
        (0..self.m())
            .map(|a| {
                (0..self.m())
                    .map(|b| {
                        if a == b {
                            var[a]
                        } else {
                            self.covariance(a, b).expect("indices in range")
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Draws `count` samples from the law truncated at the same last site as
    /// [`pmf_table`](Self::pmf_table). Sample `i` uses stream `i` of a
    /// ChaCha8 generator keyed by `seed`, so output does not depend on the
    /// number of threads.
    pub fn sample(&self, count: usize, seed: u64, tail_tol: f64) -> Result<HeineSamples> {
        if count == 0 {
            return Err(Error::InvalidParameter("count must be at least 1".into()));
        }
        if !(tail_tol > 0.0 && tail_tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tail_tol must lie in (0, 1), got {tail_tol}"
            )));
        }
        let last = self.last_site(tail_tol / 2.0);
        let cumulative: Vec<Vec<f64>> = (0..=last)
            .map(|j| {
                let mut c = 0.0;
                self.site_probabilities(j)
                    .occupied()
                    .iter()
                    .map(|p| {
                        c += p;
                        c
                    })
                    .collect()
            })
            .collect();
        let m = self.m();
        let samples = (0..count)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let mut counts = vec![0usize; m];
                for cum in &cumulative {
                    let u: f64 = rng.random();
                    if let Some(k) = cum.iter().position(|&c| u < c) {
                        counts[k] += 1;
                    }
                }
                counts
            })
            .collect();
        Ok(HeineSamples {
            samples,
            j_max: last,
            tv_bound: self.tail_bound(last),
            seed,
        })
    }
}

/// Smallest caps with `P(X_k > cap_k) <= tol` for each coordinate, from the
/// exact Poisson-binomial marginal over the given sites.
pub(crate) fn caps_from_marginals(sites: &[SiteDistribution], m: usize, tol: f64) -> Vec<usize> {
    (0..m)
        .map(|k| {
            let pb = poisson_binomial(sites.iter().map(|s| s.probs[k + 1]));
            let mut tail: f64 = pb.iter().sum();
            for (c, &p) in pb.iter().enumerate() {
                tail -= p;
                if tail <= tol {
                    return c;
                }
            }
            pb.len() - 1
        })
        .collect()
}

/// Pmf of a sum of independent Bernoulli variables.
pub(crate) fn poisson_binomial<I: IntoIterator<Item = f64>>(ps: I) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for p in ps {
        if p == 0.0 {
            continue;
        }
        pmf.push(0.0);
        for c in (0..pmf.len()).rev() {
            let stay = pmf[c] * (1.0 - p);
            let up = if c > 0 { pmf[c - 1] * p } else { 0.0 };
            pmf[c] = stay + up;
        }
        while pmf.len() > 1 && *pmf.last().unwrap() < 1e-300 {
            pmf.pop();
        }
    }
    pmf
}
