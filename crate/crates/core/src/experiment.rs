//! JSON experiment configs, convergence studies and potential validation.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::count_law::{tv_distance, CountLaw};
use crate::engine::{default_epsilon, Engine, QuadMode, QuadratureConfig, Region, RegionSet};
use crate::error::{Error, Result};
use crate::limits::{case1, case2, case2_predicted_law, case2_predicted_mgf, Case1Limit, Case2Limit};
use crate::radial::{
    build_case1_with_margin, build_case2, classify, validate_potential_checks, BumpSpec, Case2Args,
    CheckResult, ClassifyOptions, DropletData, RadialPotential,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Ginibre,
    Case1,
    Case2,
}

fn default_schedule() -> Vec<usize> {
    vec![64, 128, 256, 512]
}

fn default_s_grid() -> Vec<f64> {
    vec![-1.0, -0.5, 0.0, 0.5, 1.0]
}

fn default_c() -> f64 {
    10.0
}

fn default_rel_tol() -> f64 {
    1e-12
}

fn default_tail_tol() -> f64 {
    1e-12
}

fn default_mode() -> QuadMode {
    QuadMode::Windowed
}

/// Experiment description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: CaseKind,
    #[serde(default)]
    pub t: Vec<f64>,
    #[serde(default)]
    pub w: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<[[f64; 2]; 2]>,
    #[serde(rename = "M0", default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<f64>,
    #[serde(default)]
    pub margin: f64,
    /// Increasing schedule of sizes.
    #[serde(default = "default_schedule")]
    pub n: Vec<usize>,
    /// Values taken by every coordinate of `s`; the grid is their product.
    #[serde(default = "default_s_grid")]
    pub s_grid: Vec<f64>,
    #[serde(rename = "C", default = "default_c")]
    pub c: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_mode")]
    pub mode: QuadMode,
    /// Neighbourhood half-width around outposts; defaults to a fifth of the
    /// smallest gap between special radii.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Explicit hard intervals (case 1 only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<Vec<[f64; 2]>>,
    /// Explicit bumps (case 1 only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bumps: Option<Vec<BumpSpec>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The case-1 study of the two exterior outposts `t = (1.5, 2.0)`.
    pub fn case1_example() -> Self {
        Self {
            case: CaseKind::Case1,
            t: vec![1.5, 2.0],
            w: vec![0.2, 0.2],
            components: None,
            m0: None,
            margin: 0.0,
            n: default_schedule(),
            s_grid: default_s_grid(),
            c: default_c(),
            rel_tol: default_rel_tol(),
            mode: default_mode(),
            epsilon: None,
            regions: None,
            bumps: None,
            seed: 0,
            tail_tol: default_tail_tol(),
            cap: None,
            out: None,
        }
    }

    /// The case-2 study with gap outposts `t = (1.2, 1.4)`.
    pub fn case2_example() -> Self {
        Self {
            case: CaseKind::Case2,
            t: vec![1.2, 1.4],
            w: vec![0.06, 0.06],
            components: Some([[0.0, 1.0], [1.6, 2.2]]),
            m0: Some(0.5),
            ..Self::case1_example()
        }
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            rel_tol: self.rel_tol,
            window_constant: self.c,
            mode: self.mode,
            ..QuadratureConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() {
            return Err(Error::Config("n schedule is empty".into()));
        }
        if self.n[0] < 2 {
            return Err(Error::Config(format!("n must be >= 2, got {}", self.n[0])));
        }
        if self.n.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "n schedule must be strictly increasing, got {:?}",
                self.n
            )));
        }
        if self.s_grid.is_empty() || self.s_grid.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("s_grid must be a nonempty list of finite values".into()));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(Error::Config(format!("tail_tol must lie in (0, 1), got {}", self.tail_tol)));
        }
        self.quadrature().validate()?;
        match self.case {
            CaseKind::Ginibre => {}
            CaseKind::Case1 => {
                if self.components.is_some() || self.m0.is_some() {
                    return Err(Error::Config("case1 takes no components or M0".into()));
                }
            }
            CaseKind::Case2 => {
                if self.components.is_none() || self.m0.is_none() {
                    return Err(Error::Config("case2 needs components and M0".into()));
                }
                if self.regions.is_some() || self.bumps.is_some() {
                    return Err(Error::Config(
                        "explicit regions and bumps are only supported for case1".into(),
                    ));
                }
            }
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) {
                return Err(Error::Config(format!("epsilon must be positive, got {eps}")));
            }
            let special = self.special_radii();
            if let Some(w) = special.windows(2).find(|w| w[1] - w[0] <= 4.0 * eps) {
                return Err(Error::Config(format!(
                    "epsilon = {eps} too large: 2 eps neighbourhoods of {} and {} overlap",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// Droplet edges and outposts in increasing order.
    pub fn special_radii(&self) -> Vec<f64> {
        match self.case {
            CaseKind::Ginibre => vec![1.0],
            CaseKind::Case1 => std::iter::once(1.0).chain(self.t.iter().copied()).collect(),
            CaseKind::Case2 => {
                let c = self.components.unwrap_or([[0.0, 1.0], [1.6, 2.2]]);
                std::iter::once(c[0][1])
                    .chain(self.t.iter().copied())
                    .chain(std::iter::once(c[1][0]))
                    .collect()
            }
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
            .unwrap_or_else(|| default_epsilon(&self.special_radii()))
    }

    pub fn build_potential(&self) -> Result<RadialPotential> {
        match self.case {
            CaseKind::Ginibre => Ok(RadialPotential::ginibre()),
            CaseKind::Case1 => build_case1_with_margin(&self.t, &self.w, self.margin),
            CaseKind::Case2 => build_case2(&Case2Args {
                components: self.components.expect("validated"),
                m0: self.m0.expect("validated"),
                t: self.t.clone(),
                w: self.w.clone(),
                margin: self.margin,
            }),
        }
    }

    /// Hard and smooth statistics for size `n`.
    fn statistics(&self, data: &DropletData, r_max: f64, m0_index: usize) -> Result<(RegionSet, RegionSet)> {
        let eps = self.epsilon();
        match self.case {
            CaseKind::Case1 => {
                let hard = match &self.regions {
                    Some(r) => RegionSet::new(
                        r.iter().map(|&[lo, hi]| Region::Interval { lo, hi }).collect(),
                    )?,
                    None => RegionSet::outposts_hard(&data.outposts, eps)?,
                };
                let smooth = match &self.bumps {
                    Some(b) => RegionSet::new(b.iter().map(|&s| Region::bump(s)).collect())?,
                    None => RegionSet::outposts_smooth(&data.outposts, eps)?,
                };
                if hard.m() != data.outposts.len() || smooth.m() != data.outposts.len() {
                    return Err(Error::Config(format!(
                        "{} outposts but {} regions and {} bumps",
                        data.outposts.len(),
                        hard.m(),
                        smooth.m()
                    )));
                }
                Ok((hard, smooth))
            }
            CaseKind::Case2 => Ok((
                RegionSet::gap_hard(&data.outposts, eps, m0_index, r_max)?,
                RegionSet::gap_smooth(&data.outposts, eps, m0_index, r_max)?,
            )),
            CaseKind::Ginibre => Err(Error::Config(
                "a convergence study needs outposts (case1 or case2)".into(),
            )),
        }
    }
}

/// Every point of `values^m`, in lexicographic order.
pub fn s_product(values: &[f64], m: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum LimitRecord {
    Case1(Case1Limit),
    Case2(Case2Limit),
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub tv_lo: f64,
    pub tv_hi: f64,
    /// Max over the s grid of `|joint_mgf / predicted - 1|` (smooth statistics).
    pub mgf_err_max: f64,
    /// Max over the s grid of `|joint_mgf(smooth) / mgf(exact hard law) - 1|`.
    pub smooth_hard_gap: f64,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_n: Option<f64>,
    pub epsilon: f64,
    pub exact_mean: Vec<f64>,
    pub predicted_mean: Vec<f64>,
    pub limit: LimitRecord,
    /// The config narrowed to this row's `n`; enough to rerun it alone.
    pub echo: ExperimentConfig,
    pub hard: RegionSet,
    pub smooth: RegionSet,
    #[serde(skip)]
    pub exact: CountLaw,
    #[serde(skip)]
    pub predicted: CountLaw,
}

impl ConvergenceRow {
    /// `alpha_0, ..., p_exact, p_predicted` over the union of both supports.
    pub fn pmf_csv(&self) -> String {
        let m = self.exact.m();
        let mut header: Vec<String> = (0..m).map(|k| format!("alpha_{k}")).collect();
        header.push("p_exact".into());
        header.push("p_predicted".into());
        let mut out = header.join(",") + "\n";
        let mut keys: Vec<Vec<usize>> = self
            .exact
            .entries()
            .into_iter()
            .chain(self.predicted.entries())
            .filter(|(_, p)| *p > 0.0)
            .map(|(a, _)| a)
            .collect();
        keys.sort();
        keys.dedup();
        for a in keys {
            let cells: Vec<String> = a.iter().map(|x| x.to_string()).collect();
            out += &format!(
                "{},{},{}\n",
                cells.join(","),
                self.exact.prob(&a),
                self.predicted.prob(&a)
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub config: ExperimentConfig,
    pub droplet: DropletData,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    /// `n,tv_lo,tv_hi,mgf_err_max,seconds`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,tv_lo,tv_hi,mgf_err_max,seconds\n");
        for r in &self.rows {
            out += &format!("{},{},{},{},{}\n", r.n, r.tv_lo, r.tv_hi, r.mgf_err_max, r.seconds);
        }
        out
    }
}

/// Builds, classifies and compares the exact finite-n laws with the limit
/// laws at every size in the schedule.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let pot = cfg.build_potential()?;
    let droplet = classify(&pot, ClassifyOptions::default())?;
    let expected = match cfg.case {
        CaseKind::Case1 => crate::radial::CaseTag::Case1,
        CaseKind::Case2 => crate::radial::CaseTag::Case2,
        CaseKind::Ginibre => {
            return Err(Error::Config(
                "a convergence study needs outposts (case1 or case2)".into(),
            ))
        }
    };
    if droplet.case_tag != expected {
        return Err(Error::Config(format!(
            "config case does not match the built potential, classified as {}",
            droplet.case_tag
        )));
    }
    let rows = cfg
        .n
        .par_iter()
        .map(|&n| convergence_row(cfg, &pot, &droplet, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport {
        config: cfg.clone(),
        droplet,
        rows,
    })
}

fn convergence_row(
    cfg: &ExperimentConfig,
    pot: &RadialPotential,
    droplet: &DropletData,
    n: usize,
) -> Result<ConvergenceRow> {
    let start = Instant::now();
    let (limit, predicted, m0_index, x_n) = match cfg.case {
        CaseKind::Case1 => {
            let lim = case1(droplet, pot)?;
            let law = lim.heine.pmf_table(cfg.tail_tol)?;
            (LimitRecord::Case1(lim), law, 0, None)
        }
        _ => {
            let lim = case2(droplet, pot, n)?;
            let law = case2_predicted_law(&lim, cfg.tail_tol)?;
            let (i, x) = (lim.m0_index, lim.x_n);
            (LimitRecord::Case2(lim), law, i, Some(x))
        }
    };
    let (hard, smooth) = cfg.statistics(droplet, pot.r_max(), m0_index)?;
    let engine = Engine::new(pot, n, cfg.quadrature())?;
    let exact = engine.exact_count_law(&hard, cfg.cap.as_deref())?;
    let tv = tv_distance(&exact, &predicted)?;
    let bound = (n as f64).ln();
    let mut mgf_err_max: f64 = 0.0;
    let mut smooth_hard_gap: f64 = 0.0;
    for s in s_product(&cfg.s_grid, hard.m()) {
        if s.iter().any(|v| v.abs() > bound) {
            continue;
        }
        let finite = engine.joint_mgf(&s, &smooth)?;
        let predicted_mgf = match &limit {
            LimitRecord::Case1(l) => l.heine.mgf(&s)?,
            LimitRecord::Case2(l) => case2_predicted_mgf(l, &s)?,
        };
        mgf_err_max = mgf_err_max.max((finite / predicted_mgf - 1.0).abs());
        smooth_hard_gap = smooth_hard_gap.max((finite / exact.mgf(&s)? - 1.0).abs());
    }
    Ok(ConvergenceRow {
        n,
        tv_lo: tv.lo,
        tv_hi: tv.hi,
        mgf_err_max,
        smooth_hard_gap,
        seconds: start.elapsed().as_secs_f64(),
        x_n,
        epsilon: cfg.epsilon(),
        exact_mean: exact.mean(),
        predicted_mean: predicted.mean(),
        limit,
        echo: ExperimentConfig {
            n: vec![n],
            ..cfg.clone()
        },
        hard,
        smooth,
        exact,
        predicted,
    })
}

/// Outcome of the potential validator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub droplet: Option<DropletData>,
    pub passed: bool,
}

/// Builds the configured potential and runs every validator check.
pub fn validate_potential(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    let pot = cfg.build_potential()?;
    let checks = validate_potential_checks(&pot);
    let droplet = classify(&pot, ClassifyOptions::default()).ok();
    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        checks,
        droplet,
        passed,
    })
}
