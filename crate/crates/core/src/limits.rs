//! Limiting Heine laws for particle counts near outposts.

use serde::Serialize;

use crate::count_law::{convolve_mapped, CoordinateMap, CountLaw};
use crate::error::{Error, Result};
use crate::heine::HeineParams;
use crate::radial::{CaseTag, DropletData, RadialPotential};

/// Terms of the moment series are summed until they drop below this.
const SERIES_TAIL: f64 = 1e-14;

/// `M0 n` this close (per unit of `n`) to an integer counts as that integer.
const MASS_SNAP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Case1Limit {
    pub m: usize,
    /// `sqrt(Delta Q(b_0) / Delta Q(t_k))`.
    pub vartheta: Vec<f64>,
    /// `b_0 / t_k`.
    pub rho: Vec<f64>,
    /// `theta_k = vartheta_k rho_k`, `q_k = rho_k^2`.
    pub heine: HeineParams,
}

/// Mean vector, variances and covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
}

fn positive_laplacian(pot: &RadialPotential, r: f64, what: &str) -> Result<f64> {
    let l = pot.laplacian(r)?;
    if !(l > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Delta Q({what} = {r}) = {l} must be positive"
        )));
    }
    Ok(l)
}

fn require_tag(data: &DropletData, tag: CaseTag) -> Result<()> {
    if data.case_tag != tag {
        return Err(Error::InvalidParameter(format!(
            "droplet is classified as {}, expected {tag}",
            data.case_tag
        )));
    }
    Ok(())
}

/// Limit parameters for outposts outside a single component `[a_0, b_0]`.
pub fn case1(data: &DropletData, pot: &RadialPotential) -> Result<Case1Limit> {
    require_tag(data, CaseTag::Case1)?;
    let b0 = data.b0();
    let lap_b = positive_laplacian(pot, b0, "b_0")?;
    let mut vartheta = Vec::with_capacity(data.outposts.len());
    let mut rho = Vec::with_capacity(data.outposts.len());
    for (k, &t) in data.outposts.iter().enumerate() {
        if !(t > b0) {
            return Err(Error::OutpostPlacement {
                index: k,
                t,
                reason: format!("outpost must lie beyond b_0 = {b0}"),
            });
        }
        vartheta.push((lap_b / positive_laplacian(pot, t, "t_k")?).sqrt());
        rho.push(b0 / t);
    }
    case1_from_parts(vartheta, rho)
}

/// Case-1 limit from raw `(vartheta, rho)`.
pub fn case1_from_parts(vartheta: Vec<f64>, rho: Vec<f64>) -> Result<Case1Limit> {
    let heine = HeineParams::new(
        vartheta.iter().zip(&rho).map(|(v, r)| v * r).collect(),
        rho.iter().map(|r| r * r).collect(),
    )?;
    Ok(Case1Limit {
        m: rho.len(),
        vartheta,
        rho,
        heine,
    })
}

/// Site probabilities `vartheta_k rho_k^{2j+1} / (1 + sum_l vartheta_l rho_l^{2j+1})`
/// summed into mean, variance and covariance series.
fn series_moments(vartheta: &[f64], rho: &[f64]) -> Moments {
    let m = rho.len();
    let mut mean = vec![0.0; m];
    let mut variance = vec![0.0; m];
    let mut covariance = vec![vec![0.0; m]; m];
    let mut odds: Vec<f64> = vartheta.iter().zip(rho).map(|(v, r)| v * r).collect();
    let q: Vec<f64> = rho.iter().map(|r| r * r).collect();
    loop {
        let denom = 1.0 + odds.iter().sum::<f64>();
        for a in 0..m {
            let pa = odds[a] / denom;
            mean[a] += pa;
            let rest: f64 = 1.0 + odds.iter().enumerate().filter(|&(k, _)| k != a).map(|(_, o)| o).sum::<f64>();
            variance[a] += odds[a] * rest / (denom * denom);
            for b in 0..m {
                if b != a {
                    covariance[a][b] -= odds[a] * odds[b] / (denom * denom);
                }
            }
        }
        let tail: f64 = odds.iter().zip(&q).map(|(o, q)| o / (1.0 - q)).sum();
        if tail < SERIES_TAIL {
            break;
        }
        for (o, q) in odds.iter_mut().zip(&q) {
            *o *= q;
        }
    }
    for a in 0..m {
        covariance[a][a] = variance[a];
    }
    Moments {
        mean,
        variance,
        covariance,
    }
}

/// Limiting mean, variance and covariances of the outpost counts.
pub fn case1_moments(lim: &Case1Limit) -> Moments {
    series_moments(&lim.vartheta, &lim.rho)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Case2Limit {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "M0")]
    pub m0: f64,
    /// `floor(M0 n)`.
    pub m0_index: usize,
    pub x_n: f64,
    /// `(b_0/a_1, t_1/a_1, ..., t_m/a_1)`.
    pub tilde_rho: Vec<f64>,
    /// `(b_0/t_1, ..., b_0/t_m, b_0/a_1)`.
    pub hat_rho: Vec<f64>,
    pub tilde_vartheta: Vec<f64>,
    pub hat_vartheta: Vec<f64>,
    /// Law over coordinates `0..=m`.
    pub tilde: HeineParams,
    /// Law over coordinates `1..=m+1`.
    pub hat: HeineParams,
}

/// Limit parameters at size `n` for outposts in the gap `(b_0, a_1)`.
pub fn case2(data: &DropletData, pot: &RadialPotential, n: usize) -> Result<Case2Limit> {
    require_tag(data, CaseTag::Case2)?;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("n must be >= 2, got {n}")));
    }
    let b0 = data.b0();
    let a1 = data
        .a1()
        .ok_or_else(|| Error::InvalidParameter("case 2 needs a second component".into()))?;
    let m0 = data.m0();
    let lap_b = positive_laplacian(pot, b0, "b_0")?;
    let lap_a = positive_laplacian(pot, a1, "a_1")?;
    let mut laps = Vec::with_capacity(data.outposts.len());
    for (k, &t) in data.outposts.iter().enumerate() {
        if !(t > b0 && t < a1) {
            return Err(Error::OutpostPlacement {
                index: k,
                t,
                reason: format!("outpost must lie in the gap ({b0}, {a1})"),
            });
        }
        laps.push(positive_laplacian(pot, t, "t_k")?);
    }
    case2_from_parts(n, m0, b0, a1, &data.outposts, lap_b, lap_a, &laps)
}

/// Case-2 limit from radii and Laplacian values.
#[allow(clippy::too_many_arguments)]
pub fn case2_from_parts(
    n: usize,
    m0: f64,
    b0: f64,
    a1: f64,
    t: &[f64],
    lap_b0: f64,
    lap_a1: f64,
    lap_t: &[f64],
) -> Result<Case2Limit> {
    let scaled = m0 * n as f64;
    // M0 comes from the classifier, accurate to about 1e-8; within that of an
    // integer the fractional part is noise and the floor could be off by one
    let nearest = scaled.round();
    let m0_index = if (scaled - nearest).abs() <= MASS_SNAP * n as f64 {
        nearest
    } else {
        scaled.floor()
    };
    let x_n = scaled - m0_index;
    let x_n = if x_n.abs() <= MASS_SNAP * n as f64 { 0.0 } else { x_n };
    let rho0 = b0 / a1;
    let m = t.len();

    let mut tilde_rho = vec![rho0];
    let mut tilde_vartheta = vec![(lap_a1 / lap_b0).sqrt() * rho0.powf(-2.0 * x_n)];
    let mut hat_rho = Vec::with_capacity(m + 1);
    let mut hat_vartheta = Vec::with_capacity(m + 1);
    for (&tk, &lap) in t.iter().zip(lap_t) {
        let rt = tk / a1;
        let rh = b0 / tk;
        tilde_rho.push(rt);
        tilde_vartheta.push((lap_a1 / lap).sqrt() * rt.powf(-2.0 * x_n));
        hat_rho.push(rh);
        hat_vartheta.push((lap_b0 / lap).sqrt() * rh.powf(2.0 * x_n));
    }
    hat_rho.push(rho0);
    hat_vartheta.push(1.0 / tilde_vartheta[0]);

    let heine = |v: &[f64], r: &[f64]| {
        HeineParams::new(
            v.iter().zip(r).map(|(v, r)| v * r).collect(),
            r.iter().map(|r| r * r).collect(),
        )
    };
    Ok(Case2Limit {
        n,
        m,
        m0,
        m0_index: m0_index as usize,
        x_n,
        tilde: heine(&tilde_vartheta, &tilde_rho)?,
        hat: heine(&hat_vartheta, &hat_rho)?,
        tilde_rho,
        hat_rho,
        tilde_vartheta,
        hat_vartheta,
    })
}

impl Case2Limit {
    /// Hat coordinate `m+1` joins combined coordinate 0.
    pub fn coordinate_map(&self) -> CoordinateMap {
        CoordinateMap::gap_decomposition(self.m)
    }

    /// `hat_vartheta_{m+1} * tilde_vartheta_0`, equal to 1.
    pub fn reciprocity(&self) -> f64 {
        self.hat_vartheta[self.m] * self.tilde_vartheta[0]
    }

    /// `s` for the hat law, with `s_{m+1}` bound to `s_0`.
    fn hat_s(&self, s: &[f64]) -> Vec<f64> {
        let mut out = s[1..].to_vec();
        out.push(s[0]);
        out
    }

    fn check_s(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.m + 1 {
            return Err(Error::ArityMismatch {
                expected: self.m + 1,
                found: s.len(),
            });
        }
        Ok(())
    }
}

/// Combined law of `(N_0, N_1, ..., N_m)`: the tilde and hat laws are
/// independent and added after mapping hat coordinate `m+1` onto 0.
pub fn case2_predicted_law(lim: &Case2Limit, tail_tol: f64) -> Result<CountLaw> {
    let a = lim.tilde.pmf_table(tail_tol / 2.0)?;
    let b = lim.hat.pmf_table(tail_tol / 2.0)?;
    convolve_mapped(&a, &b, &lim.coordinate_map())
}

/// Product of the two Heine MGFs with `s_{m+1} = s_0`.
pub fn case2_predicted_mgf(lim: &Case2Limit, s: &[f64]) -> Result<f64> {
    lim.check_s(s)?;
    Ok((lim.tilde.log_mgf(s)? + lim.hat.log_mgf(&lim.hat_s(s))?).exp())
}

/// Moments of the case-2 limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Case2Moments {
    /// Over the combined coordinates `0..=m`.
    pub combined: Moments,
    pub tilde: Moments,
    /// Over hat coordinates `1..=m+1`.
    pub hat: Moments,
    /// Covariances between tilde coordinates (rows) and hat coordinates
    /// (columns); zero by independence.
    pub mixed_covariance: Vec<Vec<f64>>,
}

pub fn case2_moments(lim: &Case2Limit) -> Case2Moments {
    let tilde = series_moments(&lim.tilde_vartheta, &lim.tilde_rho);
    let hat = series_moments(&lim.hat_vartheta, &lim.hat_rho);
    let m = lim.m;
    // hat index i (0-based, coordinate i+1) lands on combined i+1, except the last
    let target = |i: usize| if i == m { 0 } else { i + 1 };
    let mut mean = tilde.mean.clone();
    let mut variance = tilde.variance.clone();
    let mut covariance = tilde.covariance.clone();
    for i in 0..=m {
        mean[target(i)] += hat.mean[i];
        variance[target(i)] += hat.variance[i];
        for k in 0..=m {
            covariance[target(i)][target(k)] += hat.covariance[i][k];
        }
    }
    Case2Moments {
        combined: Moments {
            mean,
            variance,
            covariance,
        },
        tilde,
        hat,
        mixed_covariance: vec![vec![0.0; m + 1]; m + 1],
    }
}
