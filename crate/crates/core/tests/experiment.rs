use outposts_core::experiment::{run_convergence, validate_potential, CaseKind, ExperimentConfig};
use outposts_core::Error;

/// CSV without the wall-clock column.
fn without_seconds(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').unwrap().0)
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn config_keys_and_defaults() {
    let cfg = ExperimentConfig::from_json_str(r#"{"case": "case1", "t": [1.5, 2.0], "w": [0.2, 0.2]}"#).unwrap();
    assert_eq!(cfg.n, vec![64, 128, 256, 512]);
    assert_eq!(cfg.s_grid, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    assert!((cfg.epsilon() - 0.1).abs() < 1e-12);

    let cfg = ExperimentConfig::from_json_str(
        r#"{"case": "case2", "components": [[0, 1], [1.6, 2.2]], "M0": 0.5, "t": [1.2, 1.4], "w": [0.06, 0.06],
            "n": [100], "C": 12, "rel_tol": 1e-11, "mode": "both", "seed": 9, "tail_tol": 1e-10}"#,
    )
    .unwrap();
    assert_eq!(cfg.case, CaseKind::Case2);
    assert_eq!(cfg.m0, Some(0.5));
    assert!((cfg.epsilon() - 0.04).abs() < 1e-12);
    assert_eq!(cfg.quadrature().window_constant, 12.0);
}

#[test]
fn config_rejections() {
    let bad = [
        r#"{"case": "case1", "t": [1.5, 2.0], "w": [0.2, 0.2], "n": [128, 64]}"#,
        r#"{"case": "case1", "t": [1.5, 2.0], "w": [0.2, 0.2], "n": [64, 64]}"#,
        r#"{"case": "case1", "t": [1.5, 2.0], "w": [0.2, 0.2], "epsilon": 0.2}"#,
        r#"{"case": "case1", "t": [1.5, 2.0], "w": [0.2, 0.2], "bogus": 1}"#,
    ];
    for text in bad {
        let err = ExperimentConfig::from_json_str(text).unwrap_err();
        assert!(err.is_invalid_input(), "{text}: {err}");
    }
}

#[test]
fn single_row_schedule() {
    let mut cfg = ExperimentConfig::case1_example();
    cfg.n = vec![64];
    let report = run_convergence(&cfg).unwrap();
    assert_eq!(report.rows.len(), 1);
    let row = &report.rows[0];
    assert_eq!(row.n, 64);
    assert!(row.tv_lo.is_finite() && row.tv_hi.is_finite() && row.mgf_err_max.is_finite());
    assert!(row.tv_lo <= row.tv_hi);
    assert_eq!(row.echo.n, vec![64]);
    assert_eq!(report.to_csv().lines().count(), 2);
}

#[test]
fn case1_tv_decreases_along_schedule() {
    let mut cfg = ExperimentConfig::case1_example();
    cfg.n = vec![32, 64, 128];
    let report = run_convergence(&cfg).unwrap();
    let tv: Vec<f64> = report.rows.iter().map(|r| r.tv_hi).collect();
    assert!(tv.windows(2).all(|w| w[1] < w[0]), "{tv:?}");
}

#[test]
fn case2_rows_echo_x_n() {
    let mut cfg = ExperimentConfig::case2_example();
    cfg.n = vec![63, 64];
    let report = run_convergence(&cfg).unwrap();
    let x: Vec<f64> = report.rows.iter().map(|r| r.x_n.unwrap()).collect();
    assert!((x[0] - 0.5).abs() < 1e-6 && x[1] == 0.0, "{x:?}");
    let json = serde_json::to_value(&report).unwrap();
    assert_eq!(json["rows"][0]["x_n"], serde_json::json!(x[0]));
}

#[test]
fn reports_are_reproducible_across_thread_counts() {
    let mut cfg = ExperimentConfig::case1_example();
    cfg.n = vec![32, 48];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_convergence(&cfg).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(without_seconds(&a.to_csv()), without_seconds(&b.to_csv()));
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.pmf_csv(), y.pmf_csv());
    }
}

#[test]
fn validator_reports() {
    let report = validate_potential(&ExperimentConfig::case1_example()).unwrap();
    assert!(report.passed);
    assert!(report.checks.iter().any(|c| c.name == "peak-structure"));

    let ginibre = ExperimentConfig::from_json_str(r#"{"case": "ginibre"}"#).unwrap();
    let report = validate_potential(&ginibre).unwrap();
    assert!(report.passed);
    assert_eq!(report.droplet.unwrap().case_tag.to_string(), "none");

    let overlap = ExperimentConfig::from_json_str(r#"{"case": "case1", "t": [1.5, 1.7], "w": [0.2, 0.2], "epsilon": 0.01}"#);
    let err = overlap.and_then(|c| validate_potential(&c)).unwrap_err();
    assert!(matches!(err, Error::WindowOverlap { .. }), "{err}");
}
