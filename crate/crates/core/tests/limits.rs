use outposts_core::engine::{joint_mgf, QuadratureConfig, RegionSet};
use outposts_core::limits::{
    case1, case1_from_parts, case1_moments, case2, case2_from_parts, case2_moments, case2_predicted_law,
    case2_predicted_mgf, Case2Limit,
};
use outposts_core::radial::{build_case1, build_case2, classify, Case2Args, ClassifyOptions, RadialPotential};
use outposts_core::HeineParams;
use proptest::prelude::*;

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

fn case2_limit(pot: &RadialPotential, n: usize) -> Case2Limit {
    let data = classify(pot, ClassifyOptions::default()).unwrap();
    case2(&data, pot, n).unwrap()
}

fn s_grid(m: usize) -> Vec<Vec<f64>> {
    let vals = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let mut out = vec![vec![]];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

#[test]
fn case1_single_outpost() {
    let pot = build_case1(&[1.5], &[0.2]).unwrap();
    let data = classify(&pot, ClassifyOptions::default()).unwrap();
    let lim = case1(&data, &pot).unwrap();
    assert!((lim.rho[0] - 2.0 / 3.0).abs() < 1e-8);
    assert!((lim.vartheta[0] - 0.4268).abs() < 1e-4, "{}", lim.vartheta[0]);
    assert!((lim.heine.thetas()[0] - 0.2846).abs() < 1e-4);
    assert!((lim.heine.qs()[0] - 4.0 / 9.0).abs() < 1e-8);
    // the m = 1 record is exactly He(vartheta rho, rho^2)
    let direct = HeineParams::new(vec![lim.vartheta[0] * lim.rho[0]], vec![lim.rho[0].powi(2)]).unwrap();
    assert_eq!(direct, lim.heine);
}

#[test]
fn case1_rejects_outpost_on_the_edge() {
    assert!(case1_from_parts(vec![1.0], vec![1.0]).is_err());
}

#[test]
fn case1_moment_examples() {
    let lim = case1_from_parts(vec![1.0, 1.0], vec![0.5, 0.5]).unwrap();
    let m = case1_moments(&lim);
    assert!((m.covariance[0][1] + 0.0734).abs() < 5e-5, "{}", m.covariance[0][1]);
    let h = &lim.heine;
    for k in 0..2 {
        assert!((m.mean[k] - h.mean_vector()[k]).abs() < 1e-12);
        assert!((m.variance[k] - h.variance_vector()[k]).abs() < 1e-12);
    }
    assert!((m.covariance[0][1] - h.covariance(0, 1).unwrap()).abs() < 1e-12);
}

#[test]
fn case2_x_n_and_reciprocity() {
    let pot = case2_pot();
    for n in [64, 100, 127, 128, 511, 512] {
        let lim = case2_limit(&pot, n);
        assert!((lim.reciprocity() - 1.0).abs() < 1e-12);
        assert!((0.0..1.0).contains(&lim.x_n));
        assert!(lim.tilde_rho.iter().chain(&lim.hat_rho).all(|&r| r > 0.0 && r < 1.0));
        if n % 2 == 0 {
            assert_eq!(lim.x_n, 0.0);
        } else {
            assert!((lim.x_n - 0.5).abs() < 1e-8 * n as f64, "{}", lim.x_n - 0.5);
        }
    }
}

#[test]
fn case2_spot_values() {
    let lim = case2_limit(&case2_pot(), 100);
    assert_eq!(lim.m, 2);
    assert_eq!(lim.m0_index, 50);
    assert!((lim.hat_rho[0] - 1.0 / 1.2).abs() < 1e-6);
    assert!((lim.tilde_rho[0] - 1.0 / 1.6).abs() < 1e-6);
    assert_eq!(lim.tilde.m(), 3);
    assert_eq!(lim.hat.m(), 3);

    let json = serde_json::to_value(&lim).unwrap();
    for key in ["n", "x_n", "M0", "tilde_rho", "hat_rho", "tilde_vartheta", "hat_vartheta"] {
        assert!(json.get(key).is_some(), "{key}");
    }

    // moments: series against the predicted table
    let mom = case2_moments(&lim);
    let law = case2_predicted_law(&lim, 1e-13).unwrap();
    let cov = law.covariance();
    for (a, b) in mom.combined.mean.iter().zip(law.mean()) {
        assert!((a - b).abs() < 1e-8);
    }
    for p in 0..3 {
        for q in 0..3 {
            assert!((mom.combined.covariance[p][q] - cov[p][q]).abs() < 1e-8, "({p},{q})");
        }
    }
    assert!(mom.combined.covariance[1][2] < 0.0);
    assert!(mom.mixed_covariance.iter().flatten().all(|&c| c == 0.0));
    // mean decomposes additively, hat coordinate m+1 landing on 0
    assert!((mom.combined.mean[0] - mom.tilde.mean[0] - mom.hat.mean[2]).abs() < 1e-14);
    assert!((mom.combined.mean[1] - mom.tilde.mean[1] - mom.hat.mean[0]).abs() < 1e-14);
}

#[test]
fn case2_independence_factorisation() {
    let lim = case2_limit(&case2_pot(), 128);
    let law = case2_predicted_law(&lim, 1e-14).unwrap();
    assert_eq!(case2_predicted_mgf(&lim, &[0.0, 0.0, 0.0]).unwrap(), 1.0);
    for s in s_grid(3) {
        let combined = case2_predicted_mgf(&lim, &s).unwrap();
        let hat_s = [s[1], s[2], s[0]];
        let product = lim.tilde.mgf(&s).unwrap() * lim.hat.mgf(&hat_s).unwrap();
        assert!((combined - product).abs() <= 1e-12 * product);
        let from_table = law.mgf(&s).unwrap();
        assert!((from_table - combined).abs() <= 1e-10 * combined, "{s:?}");
    }
}

#[test]
fn degenerate_gap_is_a_sum_of_two_heine_variables() {
    let lim = case2_from_parts(101, 0.5, 1.0, 1.6, &[], 1.0, 0.8, &[]).unwrap();
    assert_eq!(lim.m, 0);
    let law = case2_predicted_law(&lim, 1e-14).unwrap();
    let a = lim.tilde.pmf_table(1e-14).unwrap();
    let b = lim.hat.pmf_table(1e-14).unwrap();
    for k in 0..12 {
        let conv: f64 = (0..=k).map(|i| a.prob(&[i]) * b.prob(&[k - i])).sum();
        assert!((law.prob(&[k]) - conv).abs() < 1e-14);
    }
}

#[test]
fn single_gap_outpost_gives_two_planar_laws() {
    let (b0, a1, t) = (1.0, 1.6, 1.3);
    let (lb, la, lt) = (1.0, 0.9, 4.0);
    let n = 7;
    let lim = case2_from_parts(n, 0.5, b0, a1, &[t], lb, la, &[lt]).unwrap();
    let x = 0.5;
    let rt0 = b0 / a1;
    let v0 = (la / lb).sqrt() * rt0.powf(-2.0 * x);
    let v1 = (la / lt).sqrt() * (t / a1).powf(-2.0 * x);
    let w1 = (lb / lt).sqrt() * (b0 / t).powf(2.0 * x);
    let tilde = HeineParams::new(vec![v0 * rt0, v1 * t / a1], vec![rt0 * rt0, (t / a1).powi(2)]).unwrap();
    let hat = HeineParams::new(vec![w1 * b0 / t, rt0 / v0], vec![(b0 / t).powi(2), rt0 * rt0]).unwrap();
    for (got, want) in lim.tilde.thetas().iter().zip(tilde.thetas()) {
        assert!((got - want).abs() < 1e-14 * want);
    }
    for (got, want) in lim.hat.thetas().iter().zip(hat.thetas()) {
        assert!((got - want).abs() < 1e-14 * want);
    }
    assert_eq!(lim.tilde.qs(), tilde.qs());
    assert_eq!(lim.hat.qs(), hat.qs());
}

#[test]
fn case2_mgf_tracks_finite_n() {
    let pot = case2_pot();
    let n = 512;
    let lim = case2_limit(&pot, n);
    let stats = RegionSet::gap_smooth(&[1.2, 1.4], 0.04, lim.m0_index, pot.r_max()).unwrap();
    let s = [0.4, 0.2, -0.3];
    let got = joint_mgf(&pot, n, &s, &stats, &QuadratureConfig::default()).unwrap();
    let want = case2_predicted_mgf(&lim, &s).unwrap();
    assert!((got - want).abs() / want < 0.03, "{got} vs {want}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn case1_series_equal_heine_moments(
        vartheta in proptest::collection::vec(0.1f64..3.0, 1..4),
        rho0 in 0.2f64..0.9,
        steps in proptest::collection::vec(0.02f64..0.2, 3),
    ) {
        let m = vartheta.len();
        let mut rho = vec![rho0];
        for k in 1..m {
            rho.push(rho[k - 1] * (1.0 - steps[k - 1]));
        }
        let lim = case1_from_parts(vartheta, rho).unwrap();
        let mom = case1_moments(&lim);
        let h = &lim.heine;
        let (mean, var) = (h.mean_vector(), h.variance_vector());
        for k in 0..m {
            prop_assert!((mom.mean[k] - mean[k]).abs() < 1e-12);
            prop_assert!((mom.variance[k] - var[k]).abs() < 1e-12);
            for l in 0..m {
                if l != k {
                    let c = h.covariance(k, l).unwrap();
                    prop_assert!(mom.covariance[k][l] < 0.0);
                    prop_assert!((mom.covariance[k][l] - c).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn case2_parameters_depend_on_n_only_through_x_n(n in 2usize..5000, shift in 1usize..50) {
        // M0 = 0.25: x_n has period 4
        let a = case2_from_parts(n, 0.25, 1.0, 1.7, &[1.2, 1.5], 1.0, 0.7, &[3.0, 5.0]).unwrap();
        let b = case2_from_parts(n + 4 * shift, 0.25, 1.0, 1.7, &[1.2, 1.5], 1.0, 0.7, &[3.0, 5.0]).unwrap();
        prop_assert!((a.x_n - b.x_n).abs() < 1e-12);
        for (x, y) in a.tilde_vartheta.iter().zip(&b.tilde_vartheta).chain(a.hat_vartheta.iter().zip(&b.hat_vartheta)) {
            prop_assert!((x - y).abs() < 1e-12 * x.abs().max(1.0));
        }
        prop_assert!((a.reciprocity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn case2_covariances_are_negative(n in 2usize..2000, lt in proptest::collection::vec(0.5f64..8.0, 3)) {
        let lim = case2_from_parts(n, 0.4, 1.0, 1.8, &[1.2, 1.4, 1.6], 1.0, 0.6, &lt).unwrap();
        let mom = case2_moments(&lim);
        for p in 1..=3 {
            for q in 1..=3 {
                if p != q {
                    prop_assert!(mom.combined.covariance[p][q] < 0.0);
                }
            }
        }
    }
}
