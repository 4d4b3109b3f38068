//! Invariants of the one-population master equation over random
//! calibrations.

use mfg_pow::det1d::{master_residual_1d, solve_master_1d_with_stats};
use mfg_pow::model::default_k_max;
use mfg_pow::{
    drift_root, simulate_trajectory, stationary_state_closed_form, Grid1D, ModelParams,
    SolverOptions,
};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = ModelParams<f64>> {
    (
        0.01f64..0.2,
        0.05f64..1.0,
        0.2f64..5.0,
        0.005f64..0.2,
        0.0f64..0.5,
    )
        .prop_map(|(r, delta, lam, c, eps)| ModelParams {
            r,
            delta,
            lam,
            c,
            eps,
        })
}

/// Independent oracle for the stationary state: bisection on
/// `λ(1/(K+ε) − c)/(r+δ) − δK`, which is strictly decreasing in `K`.
fn stationary_by_bisection(p: &ModelParams<f64>) -> f64 {
    let f = |k: f64| p.lam * (1.0 / (k + p.eps) - p.c) / (p.r + p.delta) - p.delta * k;
    let (mut lo, mut hi) = (0.0, 1.0 / p.c);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn closed_form_matches_bisection(p in params()) {
        let k = stationary_state_closed_form(&p);
        let oracle = stationary_by_bisection(&p);
        prop_assert!((k - oracle).abs() <= 1e-10 * oracle.max(1.0), "{k} vs {oracle}");
    }

    #[test]
    fn solution_is_monotone_and_solves_the_scheme(p in params()) {
        let g = Grid1D::for_params(&p, 1500).unwrap();
        let (u, stats) = solve_master_1d_with_stats(&p, &g, &SolverOptions::default()).unwrap();
        prop_assert!(stats.residual <= 1e-8);
        prop_assert!(master_residual_1d(&p, &u) <= 1e-8);
        prop_assert!(u.is_non_increasing(1e-12));
        // U(k_max) < 0 on the default domain
        prop_assert!(*u.values.last().unwrap() < 0.0);
        let k = drift_root(&p, &u).unwrap();
        let exact = stationary_state_closed_form(&p);
        // The default domain must reach the sign change of U, which for small
        // r lies far beyond K*; the root is then only located to within a cell.
        let h = g.spacing();
        let tol = if h <= 0.1 * exact { 2e-3 * exact.max(1.0) } else { h };
        prop_assert!((k - exact).abs() <= tol, "{k} vs {exact} (h = {h})");
    }

    #[test]
    fn trajectories_move_toward_the_stationary_state(p in params(), frac in 0.0f64..3.0) {
        let g = Grid1D::for_params(&p, 1500).unwrap();
        let (u, _) = solve_master_1d_with_stats(&p, &g, &SolverOptions::default()).unwrap();
        let k_star = drift_root(&p, &u).unwrap();
        let k0 = (frac * k_star).min(default_k_max(&p));
        let path = simulate_trajectory(&p, &u, k0, 20.0, 0.01).unwrap();
        let ks = path.component(0);
        // monotone approach without overshoot
        let gaps: Vec<f64> = ks.iter().map(|k| k - k_star).collect();
        prop_assert!(gaps.windows(2).all(|w| w[1].abs() <= w[0].abs() + 1e-9));
        prop_assert!(gaps.iter().all(|g| g.signum() == gaps[0].signum() || g.abs() < 1e-6));
    }
}
