use outposts_core::{convolve_mapped, tv_distance, validate_params, CoordinateMap, CountLaw, Error, HeineParams};
use proptest::prelude::*;

fn params(theta: &[f64], q: &[f64]) -> HeineParams {
    HeineParams::new(theta.to_vec(), q.to_vec()).unwrap()
}

/// `theta^k q^{k(k-1)/2} / ((q;q)_k (-theta;q)_inf)`, straight from the definition.
fn one_dim_closed_form(theta: f64, q: f64, k: usize) -> f64 {
    let mut qq = 1.0;
    for i in 1..=k {
        qq *= 1.0 - q.powi(i as i32);
    }
    let mut z = 1.0;
    for j in 0..4000 {
        z *= 1.0 + theta * q.powi(j);
    }
    theta.powi(k as i32) * q.powf((k * k.saturating_sub(1)) as f64 / 2.0) / qq / z
}

fn empty_probability(theta: &[f64], q: &[f64]) -> f64 {
    let mut z = 1.0;
    for j in 0..4000 {
        z *= 1.0 + theta.iter().zip(q).map(|(t, q)| t * q.powi(j)).sum::<f64>();
    }
    1.0 / z
}

#[test]
fn validation_examples() {
    assert_eq!(validate_params(&[1.0], &[0.5]).unwrap().m(), 1);
    assert_eq!(validate_params(&[1.0, 2.0], &[0.5, 0.25]).unwrap().m(), 2);
    let err = validate_params(&[1.0], &[1.0]).unwrap_err();
    assert!(matches!(err, Error::QOutOfRange { .. }));
    assert!(err.to_string().contains("q out of range"));
}

#[test]
fn site_probability_examples() {
    let p = params(&[1.0], &[0.5]);
    let s0 = p.site_probabilities(0);
    assert!((s0.empty() - 0.5).abs() < 1e-15 && (s0.occupied()[0] - 0.5).abs() < 1e-15);
    let s1 = p.site_probabilities(1);
    assert!((s1.empty() - 2.0 / 3.0).abs() < 1e-15);
    assert!((s1.occupied()[0] - 1.0 / 3.0).abs() < 1e-15);
    let s = params(&[1.0, 1.0], &[0.5, 0.5]).site_probabilities(0);
    for v in [s.empty(), s.occupied()[0], s.occupied()[1]] {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn pmf_table_examples() {
    let law = params(&[1.0], &[0.5]).pmf_table(1e-12).unwrap();
    let p0 = law.prob(&[0]);
    assert!((p0 - 0.20971).abs() < 5e-6, "{p0}");
    assert!((law.prob(&[1]) - 2.0 * p0).abs() < 1e-12);
    assert!((law.prob(&[1]) - 0.41943).abs() < 1e-5);

    let law = params(&[1.0, 1.0], &[0.5, 0.25]).pmf_table(1e-12).unwrap();
    let p00 = law.prob(&[0, 0]);
    assert!((p00 - 0.112).abs() < 5e-4, "{p00}");
    assert!((p00 - empty_probability(&[1.0, 1.0], &[0.5, 0.25])).abs() < 1e-14);
}

#[test]
fn pmf_point_examples() {
    for (theta, q) in [(vec![0.7], vec![0.4]), (vec![1.0, 0.3], vec![0.5, 0.8])] {
        let p = params(&theta, &q);
        let zero = vec![0; theta.len()];
        let got = p.pmf_point(&zero, 1e-14).unwrap().p;
        assert!((got - empty_probability(&theta, &q)).abs() < 1e-13);
    }
    let got = params(&[1.0], &[0.5]).pmf_point(&[2], 1e-14).unwrap().p;
    assert!((got - 0.27962).abs() < 1e-5, "{got}");
    assert!((got - one_dim_closed_form(1.0, 0.5, 2)).abs() < 1e-14);
}

#[test]
fn one_dimensional_reduction_on_grid() {
    for theta in [0.5, 1.0, 2.0] {
        for q in [0.3, 0.5, 0.8] {
            let p = params(&[theta], &[q]);
            let table = p.pmf_table(1e-13).unwrap();
            for k in 0..=20 {
                let exact = one_dim_closed_form(theta, q, k);
                let point = p.pmf_point(&[k], 1e-15).unwrap().p;
                assert!((point - exact).abs() < 1e-12, "theta {theta} q {q} k {k}");
                assert!((table.prob(&[k]) - exact).abs() < 1e-12, "theta {theta} q {q} k {k}");
            }
        }
    }
}

#[test]
fn mgf_examples() {
    let p = params(&[1.0], &[0.5]);
    assert_eq!(p.mgf(&[0.0]).unwrap(), 1.0);
    assert!((p.mgf(&[2f64.ln()]).unwrap() - 3.0).abs() < 1e-12);
    // cross-check by summing 2^alpha against the table
    let table = p.pmf_table(1e-14).unwrap();
    let direct: f64 = table.entries().iter().map(|(a, p)| 2f64.powi(a[0] as i32) * p).sum();
    assert!((direct - 3.0).abs() < 1e-10);

    let p = params(&[0.8, 1.5], &[0.6, 0.3]);
    let zero = empty_probability(&[0.8, 1.5], &[0.6, 0.3]);
    assert!((p.mgf(&[-700.0, -700.0]).unwrap() - zero).abs() < 1e-10);
}

#[test]
fn moment_examples() {
    let mean = params(&[0.5], &[0.25]).mean_vector()[0];
    assert!((mean - 0.4851).abs() < 5e-5, "{mean}");
    let cov = params(&[0.5, 0.5], &[0.25, 0.25]).covariance(0, 1).unwrap();
    assert!((cov + 0.0734).abs() < 5e-5, "{cov}");
}

#[test]
fn sampler_examples() {
    let p = params(&[1e-12], &[0.5]);
    let s = p.sample(100, 7, 1e-12).unwrap();
    assert!(s.samples.iter().all(|a| a[0] == 0));

    let p = params(&[1.0], &[0.5]);
    let count = 100_000;
    let s = p.sample(count, 1, 1e-12).unwrap();
    let emp = s.samples.iter().map(|a| a[0] as f64).sum::<f64>() / count as f64;
    let se = (p.variance_vector()[0] / count as f64).sqrt();
    assert!((emp - p.mean_vector()[0]).abs() < 4.0 * se);
    assert_eq!(s, p.sample(count, 1, 1e-12).unwrap());
}

#[test]
fn sampler_histogram_matches_table() {
    let p = params(&[1.0, 0.6], &[0.5, 0.7]);
    let count = 1_000_000;
    let s = p.sample(count, 11, 1e-12).unwrap();
    let table = p.pmf_table(1e-12).unwrap();
    let mut hist = std::collections::HashMap::new();
    for a in &s.samples {
        *hist.entry(a.clone()).or_insert(0usize) += 1;
    }
    for (alpha, pa) in table.entries() {
        if pa < 1e-3 {
            continue;
        }
        let emp = *hist.get(&alpha).unwrap_or(&0) as f64 / count as f64;
        let se = (pa * (1.0 - pa) / count as f64).sqrt();
        assert!((emp - pa).abs() < 5.0 * se, "{alpha:?}: {emp} vs {pa}");
    }
}

#[test]
fn convolution_and_tv_examples() {
    let a = params(&[1.0, 0.5], &[0.5, 0.3]).pmf_table(1e-12).unwrap();
    let id = CoordinateMap::new(2, vec![0, 1], vec![0, 1]).unwrap();
    let zero = CountLaw::point_mass(&[0, 0]);
    let c = convolve_mapped(&a, &zero, &id).unwrap();
    for (alpha, p) in a.entries() {
        assert!((c.prob(&alpha) - p).abs() < 1e-16);
    }

    let x = CountLaw::from_entries(1, vec![2], &[(vec![0], 0.5), (vec![1], 0.5 - 1e-9)], 1e-9).unwrap();
    let y = CountLaw::from_entries(1, vec![2], &[(vec![0], 0.3), (vec![2], 0.7 - 2e-9)], 2e-9).unwrap();
    let map = CoordinateMap::new(1, vec![0], vec![0]).unwrap();
    let z = convolve_mapped(&x, &y, &map).unwrap();
    assert!(z.mass_deficit() <= 3e-9 + 1e-18);
    let brute: f64 = x
        .entries()
        .iter()
        .flat_map(|(a, pa)| y.entries().into_iter().map(move |(b, pb)| (a[0] + b[0]) as f64 * pa * pb))
        .sum();
    let mean: f64 = z.entries().iter().map(|(a, p)| a[0] as f64 * p).sum();
    assert!((mean - brute).abs() < 1e-12);

    let exact = CountLaw::from_entries(2, vec![1, 1], &[(vec![0, 0], 0.25), (vec![1, 0], 0.75)], 0.0).unwrap();
    let same = tv_distance(&exact, &exact).unwrap();
    assert_eq!((same.lo, same.hi), (0.0, 0.0));
    let d = tv_distance(&CountLaw::point_mass(&[0]), &CountLaw::point_mass(&[3])).unwrap();
    assert_eq!((d.lo, d.hi), (1.0, 1.0));
    let w = tv_distance(&x, &y).unwrap();
    assert!(w.hi - w.lo <= 3e-9 + 1e-15);
}

#[test]
fn count_law_json_layout() {
    let law = params(&[1.0, 1.0], &[0.3, 0.2]).pmf_table(1e-10).unwrap();
    let v = law.to_json();
    assert_eq!(v["m"], 2);
    assert!(v["entries"].is_array() && v["cap"].is_array() && v["mass_deficit"].is_number());
    let alphas: Vec<Vec<u64>> = v["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["alpha"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect())
        .collect();
    assert!(alphas.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(CountLaw::from_json(&v).unwrap(), law);
}

/// Law of a sum of independent Bernoullis, one coordinate at a time.
fn poisson_binomial(ps: &[f64]) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for &p in ps {
        let mut next = vec![0.0; pmf.len() + 1];
        for (k, &v) in pmf.iter().enumerate() {
            next[k] += v * (1.0 - p);
            next[k + 1] += v * p;
        }
        pmf = next;
    }
    pmf
}

fn arb_params() -> impl Strategy<Value = HeineParams> {
    (1usize..=3)
        .prop_flat_map(|m| {
            (
                proptest::collection::vec(0.05f64..3.0, m),
                proptest::collection::vec(0.05f64..0.85, m),
            )
        })
        .prop_map(|(t, q)| HeineParams::new(t, q).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn table_is_normalised(p in arb_params(), exp in 6i32..13) {
        let tol = 10f64.powi(-exp);
        let law = p.pmf_table(tol).unwrap();
        let mass: f64 = law.entries().iter().map(|e| e.1).sum();
        prop_assert!(mass <= 1.0 + 1e-13 && mass >= 1.0 - tol);
        prop_assert!(law.mass_deficit() <= tol);
        prop_assert!((mass + law.mass_deficit() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn point_agrees_with_table(p in arb_params(), seed in 0usize..1000) {
        let law = p.pmf_table(1e-13).unwrap();
        let entries = law.entries();
        let (alpha, pa) = &entries[seed % entries.len()];
        let point = p.pmf_point(alpha, 1e-14).unwrap().p;
        prop_assert!((point - pa).abs() < 1e-10, "{alpha:?}: {point} vs {pa}");
    }

    #[test]
    fn mgf_matches_table(p in arb_params(), s in proptest::collection::vec(-1.0f64..1.0, 3)) {
        let s = &s[..p.m()];
        let law = p.pmf_table(1e-14).unwrap();
        let direct = law.mgf(s).unwrap();
        let series = p.mgf(s).unwrap();
        // the unrecorded mass can contribute at most deficit * e^{|s| * cap-ish}; tiny here
        prop_assert!((direct - series).abs() / series < 1e-8, "{direct} vs {series}");
    }

    #[test]
    fn moments_match_table(p in arb_params()) {
        let law = p.pmf_table(1e-14).unwrap();
        let mean = p.mean_vector();
        let var = p.variance_vector();
        let cov = law.covariance();
        for (k, (a, b)) in mean.iter().zip(law.mean()).enumerate() {
            prop_assert!((a - b).abs() < 1e-8);
            prop_assert!(var[k] >= 0.0 && (var[k] - cov[k][k]).abs() < 1e-8);
        }
        for a in 0..p.m() {
            for b in 0..p.m() {
                if a != b {
                    let c = p.covariance(a, b).unwrap();
                    prop_assert!(c < 0.0);
                    prop_assert!((c - cov[a][b]).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn marginals_are_poisson_binomial(p in arb_params()) {
        let law = p.pmf_table(1e-14).unwrap();
        let last = p.last_site(1e-16);
        for k in 0..p.m() {
            let ps: Vec<f64> = (0..=last).map(|j| p.site_probabilities(j).occupied()[k]).collect();
            let exact = poisson_binomial(&ps);
            for (a, v) in law.marginal(k).iter().enumerate() {
                prop_assert!((v - exact[a]).abs() < 1e-10);
            }
        }
    }
}
