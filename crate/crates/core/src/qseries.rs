//! The two q-Pochhammer symbols needed for the one-dimensional Heine law.

/// Finite q-Pochhammer symbol `(z; q)_k = prod_{i<k} (1 - z q^i)`.
pub fn qpochhammer(z: f64, q: f64, k: usize) -> f64 {
    let mut acc = 1.0;
    let mut qi = 1.0;
    for _ in 0..k {
        acc *= 1.0 - z * qi;
        qi *= q;
    }
    acc
}

/// Infinite q-Pochhammer symbol `(z; q)_inf` for `|q| < 1`.
///
/// The product is truncated once `|z q^i|` drops below `1e-18`.
pub fn qpochhammer_inf(z: f64, q: f64) -> f64 {
    debug_assert!(q.abs() < 1.0);
    let mut log_acc = 0.0;
    let mut term = z;
    while term.abs() > 1e-18 {
        log_acc += (-term).ln_1p();
        term *= q;
    }
    log_acc.exp()
}

/// One-dimensional Heine pmf `q^{k(k-1)/2} theta^k / ((q;q)_k (-theta;q)_inf)`.
pub fn heine_pmf_1d(theta: f64, q: f64, k: usize) -> f64 {
    let kf = k as f64;
    let log_num = 0.5 * kf * (kf - 1.0) * q.ln() + kf * theta.ln();
    log_num.exp() / (qpochhammer(q, q, k) * qpochhammer_inf(-theta, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_symbol() {
        assert_eq!(qpochhammer(0.5, 0.5, 0), 1.0);
        assert!((qpochhammer(0.5, 0.5, 2) - 0.5 * 0.75).abs() < 1e-15);
    }

    #[test]
    fn infinite_symbol_matches_long_finite_product() {
        let a = qpochhammer_inf(-1.0, 0.5);
        let b = qpochhammer(-1.0, 0.5, 200);
        assert!((a - b).abs() < 1e-14 * b);
    }

    #[test]
    fn heine_pmf_sums_to_one() {
        for &(theta, q) in &[(0.5, 0.3), (2.0, 0.8), (1.0, 0.5)] {
            let s: f64 = (0..400).map(|k| heine_pmf_1d(theta, q, k)).sum();
            assert!((s - 1.0).abs() < 1e-13, "theta={theta} q={q} sum={s}");
        }
    }
}
