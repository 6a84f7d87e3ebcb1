//! Shared fixtures for the criterion benches.

use outposts_core::radial::{build_case1, build_case2, Case2Args, RadialPotential};

/// The two-outpost exterior example, `t = (1.5, 2.0)`, `w = (0.2, 0.2)`.
pub fn case1_potential() -> RadialPotential {
    build_case1(&[1.5, 2.0], &[0.2, 0.2]).expect("fixture builds")
}

/// Two components `[0, 1]`, `[1.6, 2.2]` with `M0 = 0.5` and gap outposts `1.2`, `1.4`.
pub fn case2_potential() -> RadialPotential {
    build_case2(&Case2Args {
        components: [[0.0, 1.0], [1.6, 2.2]],
        m0: 0.5,
        t: vec![1.2, 1.4],
        w: vec![0.06, 0.06],
        margin: 0.0,
    })
    .expect("fixture builds")
}
