//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use outposts_core::engine::{Engine, QuadMode, QuadratureConfig, RegionSet};
use outposts_core::experiment::{run_convergence, s_product, ExperimentConfig, LimitRecord};
use outposts_core::limits::{case1_from_parts, case1_moments, case2_moments, case2_predicted_law, case2_predicted_mgf};
use outposts_core::qseries::qpochhammer;
use outposts_core::radial::{build_case1, build_case2, classify, Case2Args, ClassifyOptions, RadialPotential};
use outposts_core::HeineParams;

/// `(passed, detail)`.
type Outcome = (bool, String);

fn params(theta: &[f64], q: &[f64]) -> HeineParams {
    HeineParams::new(theta.to_vec(), q.to_vec()).unwrap()
}

fn m1_grid() -> Vec<HeineParams> {
    let mut out = Vec::new();
    for theta in [0.5, 1.0, 2.0] {
        for q in [0.3, 0.5, 0.8] {
            out.push(params(&[theta], &[q]));
        }
    }
    out
}

fn m2_grid() -> Vec<HeineParams> {
    vec![
        params(&[1.0, 1.0], &[0.5, 0.25]),
        params(&[0.5, 2.0], &[0.8, 0.3]),
        params(&[2.0, 0.7], &[0.6, 0.45]),
    ]
}

/// `theta^k q^{k(k-1)/2} / (q;q)_k / (-theta;q)_inf`, products taken directly.
fn one_dim(theta: f64, q: f64, k: usize) -> f64 {
    let mut z = 1.0;
    for j in 0..5000 {
        z *= 1.0 + theta * q.powi(j);
    }
    theta.powi(k as i32) * q.powf((k * k.saturating_sub(1)) as f64 / 2.0) / qpochhammer(q, q, k) / z
}

fn ln_factorial(j: usize) -> f64 {
    (1..=j).map(|i| (i as f64).ln()).sum()
}

fn case1_pot() -> RadialPotential {
    build_case1(&[1.5, 2.0], &[0.2, 0.2]).unwrap()
}

fn case2_pot() -> RadialPotential {
    build_case2(&Case2Args {
        components: [[0.0, 1.0], [1.6, 2.2]],
        m0: 0.5,
        t: vec![1.2, 1.4],
        w: vec![0.06, 0.06],
        margin: 0.0,
    })
    .unwrap()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn normalisation_and_reduction() -> Outcome {
    let mut worst_mass: f64 = 0.0;
    let mut mass_ok = true;
    for p in m1_grid().iter().chain(&m2_grid()) {
        let law = p.pmf_table(1e-12).unwrap();
        let mass: f64 = law.entries().iter().map(|e| e.1).sum();
        mass_ok &= (1.0 - 1e-12..=1.0).contains(&mass);
        worst_mass = worst_mass.max((1.0 - mass).abs());
    }
    let mut worst_pmf: f64 = 0.0;
    for p in m1_grid() {
        let (theta, q) = (p.thetas()[0], p.qs()[0]);
        let law = p.pmf_table(1e-13).unwrap();
        for k in 0..=20 {
            worst_pmf = worst_pmf.max((law.prob(&[k]) - one_dim(theta, q, k)).abs());
        }
    }
    (
        mass_ok && worst_pmf <= 1e-12,
        format!("max |1 - mass| {worst_mass:.2e}, max m=1 pmf error {worst_pmf:.2e}"),
    )
}

fn mgf_exactness() -> Outcome {
    let three = params(&[1.0], &[0.5]).mgf(&[2f64.ln()]).unwrap();
    let mut worst: f64 = 0.0;
    let s_vals = [-1.0, -0.5, 0.0, 0.5, 1.0];
    for p in m1_grid().iter().chain(&m2_grid()) {
        let law = p.pmf_table(1e-14).unwrap();
        for s in s_product(&s_vals, p.m()) {
            let a = p.mgf(&s).unwrap();
            worst = worst.max((law.mgf(&s).unwrap() - a).abs() / a);
        }
    }
    (
        (three - 3.0).abs() <= 1e-12 && worst <= 1e-8,
        format!("mgf(ln 2) - 3 = {:.2e}, max mgf/pmf mismatch {worst:.2e}", three - 3.0),
    )
}

fn moment_equivalence() -> Outcome {
    let mut series: f64 = 0.0;
    let mut table: f64 = 0.0;
    let mut negative = true;
    let mut grid = m1_grid();
    grid.extend(m2_grid());
    grid.push(params(&[0.5, 1.0, 2.0], &[0.3, 0.5, 0.8]));
    for p in &grid {
        // invert theta = vartheta rho, q = rho^2
        let rho: Vec<f64> = p.qs().iter().map(|q| q.sqrt()).collect();
        let vartheta: Vec<f64> = p.thetas().iter().zip(&rho).map(|(t, r)| t / r).collect();
        let mom = case1_moments(&case1_from_parts(vartheta, rho).unwrap());
        let (mean, var) = (p.mean_vector(), p.variance_vector());
        let law = p.pmf_table(1e-14).unwrap();
        let (lmean, lcov) = (law.mean(), law.covariance());
        for a in 0..p.m() {
            series = series.max((mom.mean[a] - mean[a]).abs()).max((mom.variance[a] - var[a]).abs());
            table = table.max((lmean[a] - mean[a]).abs()).max((lcov[a][a] - var[a]).abs());
            for b in 0..p.m() {
                if a != b {
                    let c = p.covariance(a, b).unwrap();
                    series = series.max((mom.covariance[a][b] - c).abs());
                    table = table.max((lcov[a][b] - c).abs());
                    negative &= c < 0.0 && mom.covariance[a][b] < 0.0;
                }
            }
        }
    }
    (
        series <= 1e-12 && table <= 1e-8 && negative,
        format!("series vs heine {series:.2e}, table vs heine {table:.2e}, covariances negative: {negative}"),
    )
}

fn quadrature_oracle() -> Outcome {
    let cfg = |mode| QuadratureConfig {
        mode,
        ..QuadratureConfig::default()
    };
    let g = RadialPotential::ginibre();
    let mut ginibre: f64 = 0.0;
    for n in [64, 256, 1024] {
        let engine = Engine::new(&g, n, cfg(QuadMode::Windowed)).unwrap();
        for j in 0..n {
            let exact = ln_factorial(j) - (j + 1) as f64 * (n as f64).ln();
            let v = engine.log_norm(j, &[], &RegionSet::empty()).unwrap();
            ginibre = ginibre.max((v - exact).abs() / exact.abs().max(1.0));
        }
    }
    let mut modes: f64 = 0.0;
    for pot in [case1_pot(), case2_pot()] {
        for n in [128, 512] {
            let w = Engine::new(&pot, n, cfg(QuadMode::Windowed)).unwrap();
            let f = Engine::new(&pot, n, cfg(QuadMode::Full)).unwrap();
            for j in 0..n {
                let a = w.log_norm(j, &[], &RegionSet::empty()).unwrap();
                let b = f.log_norm(j, &[], &RegionSet::empty()).unwrap();
                // relative difference of the norms themselves
                modes = modes.max((a - b).exp_m1().abs());
            }
        }
    }
    (
        ginibre <= 1e-10 && modes <= 1e-8,
        format!("ginibre log-norm error {ginibre:.2e}, windowed vs full {modes:.2e}"),
    )
}

fn case1_convergence() -> Outcome {
    let report = run_convergence(&ExperimentConfig::case1_example()).unwrap();
    let tv: Vec<f64> = report.rows.iter().map(|r| r.tv_hi).collect();
    let mgf: Vec<f64> = report.rows.iter().map(|r| r.mgf_err_max).collect();
    let (first, last) = (tv[0], *tv.last().unwrap());
    let ok = strictly_decreasing(&tv)
        && last <= first / 3.0
        && last <= 0.1
        && strictly_decreasing(&mgf)
        && *mgf.last().unwrap() <= 0.03;
    (ok, format!("n = 64..512: tv_hi {}, mgf err {}", fmt(&tv), fmt(&mgf)))
}

fn case2_convergence() -> Outcome {
    let report = run_convergence(&ExperimentConfig::case2_example()).unwrap();
    let tv: Vec<f64> = report.rows.iter().map(|r| r.tv_hi).collect();
    let mgf: Vec<f64> = report.rows.iter().map(|r| r.mgf_err_max).collect();
    let recip = report
        .rows
        .iter()
        .map(|r| match &r.limit {
            LimitRecord::Case2(l) => (l.reciprocity() - 1.0).abs(),
            LimitRecord::Case1(_) => f64::INFINITY,
        })
        .fold(0.0, f64::max);
    let ok = strictly_decreasing(&tv) && *tv.last().unwrap() <= 0.15 && *mgf.last().unwrap() <= 0.05 && recip <= 1e-12;
    (
        ok,
        format!("n = 64..512: tv_hi {}, mgf err {}, reciprocity {recip:.1e}", fmt(&tv), fmt(&mgf)),
    )
}

fn monte_carlo() -> Outcome {
    let pot = case1_pot();
    let n = 128;
    let reps = 100_000u64;
    let engine = Engine::new(&pot, n, QuadratureConfig::default()).unwrap();
    let hard = RegionSet::outposts_hard(&[1.5, 2.0], 0.1).unwrap();
    let law = engine.exact_count_law(&hard, None).unwrap();
    let sampler = engine.sampler().unwrap();
    let mut hist = std::collections::HashMap::<Vec<usize>, u64>::new();
    let mut sums = [0.0f64; 2];
    for seed in 0..reps {
        let c = sampler.sample(seed).counts(&hard);
        sums[0] += c[0] as f64;
        sums[1] += c[1] as f64;
        *hist.entry(c).or_default() += 1;
    }
    let mut worst_z: f64 = 0.0;
    let mut cells = 0;
    for (alpha, p) in law.entries() {
        if p < 1e-3 {
            continue;
        }
        cells += 1;
        let emp = *hist.get(&alpha).unwrap_or(&0) as f64 / reps as f64;
        worst_z = worst_z.max((emp - p).abs() / (p * (1.0 - p) / reps as f64).sqrt());
    }
    let (mean, cov) = (law.mean(), law.covariance());
    let mut worst_mean: f64 = 0.0;
    for k in 0..2 {
        let emp = sums[k] / reps as f64;
        worst_mean = worst_mean.max((emp - mean[k]).abs() / (cov[k][k] / reps as f64).sqrt());
    }
    (
        worst_z <= 5.0 && worst_mean <= 4.0,
        format!("{cells} cells, max |z| {worst_z:.2}, max mean deviation {worst_mean:.2} sigma"),
    )
}

fn independence() -> Outcome {
    let pot = case2_pot();
    let droplet = classify(&pot, ClassifyOptions::default()).unwrap();
    let s_vals = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let mut worst: f64 = 0.0;
    let mut mixed_zero = true;
    for n in [64, 128, 256, 512] {
        let lim = outposts_core::limits::case2(&droplet, &pot, n).unwrap();
        let law = case2_predicted_law(&lim, 1e-14).unwrap();
        for s in s_product(&s_vals, lim.m + 1) {
            let mut hat_s = s[1..].to_vec();
            hat_s.push(s[0]);
            let product = lim.tilde.mgf(&s).unwrap() * lim.hat.mgf(&hat_s).unwrap();
            worst = worst.max((law.mgf(&s).unwrap() - product).abs() / product);
            worst = worst.max((case2_predicted_mgf(&lim, &s).unwrap() - product).abs() / product);
        }
        mixed_zero &= case2_moments(&lim).mixed_covariance.iter().flatten().all(|&c| c == 0.0);
    }
    (
        worst <= 1e-10 && mixed_zero,
        format!("max combined/product mismatch {worst:.2e}, mixed covariances zero: {mixed_zero}"),
    )
}

fn main() -> ExitCode {
    // libtest passes its own flags; this runner takes none
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("Heine normalisation and reduction", Duration::from_secs(1), normalisation_and_reduction),
        ("MGF exactness", Duration::from_secs(1), mgf_exactness),
        ("moment/oracle equivalence", Duration::from_secs(5), moment_equivalence),
        ("quadrature oracle", Duration::from_secs(120), quadrature_oracle),
        ("case-1 convergence", Duration::from_secs(600), case1_convergence),
        ("case-2 convergence", Duration::from_secs(900), case2_convergence),
        ("Monte Carlo cross-check", Duration::from_secs(300), monte_carlo),
        ("independence decomposition", Duration::from_secs(60), independence),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let ok = ok && elapsed <= budget;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name}: {detail} ({:.2} s, budget {} s)",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} of 8 criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
