//! The planner potential and the master equation describe the same
//! equilibrium.

use mfg_pow::{potential_check, solve_hjb, solve_master_1d, Grid1D, ModelParams, SolverOptions};

fn params(lam: f64) -> ModelParams<f64> {
    ModelParams {
        eps: 1e-3,
        lam,
        ..ModelParams::baseline()
    }
}

/// Continuous master-equation residual of `W = centered Φ'`, evaluated
/// with centered differences at interior nodes with `K >= k_lo`.
fn master_residual_of_gradient(
    p: &ModelParams<f64>,
    g: &Grid1D<f64>,
    phi: &[f64],
    k_lo: f64,
) -> f64 {
    let h = g.spacing();
    let k = g.nodes();
    let n = k.len();
    let w: Vec<f64> = (1..n - 1)
        .map(|i| (phi[i + 1] - phi[i - 1]) / (2.0 * h))
        .collect();
    // w[j] lives at node j + 1
    (1..w.len() - 1)
        .filter(|&j| k[j + 1] >= k_lo)
        .map(|j| {
            let kk = k[j + 1];
            let dw = (w[j + 1] - w[j - 1]) / (2.0 * h);
            (-(p.r + p.delta) * w[j] + (-p.delta * kk + p.lam * w[j]) * dw + 1.0 / (kk + p.eps)
                - p.c)
                .abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn differentiated_hjb_solves_the_master_equation() {
    let p = params(1.0);
    let mut res = Vec::new();
    for n in [1001, 2001, 4001] {
        let g = Grid1D::new(60.0, n).unwrap();
        let sol = solve_hjb(&p, &g, &SolverOptions::default()).unwrap();
        res.push(master_residual_of_gradient(&p, &g, &sol.phi_values, 1.0));
    }
    assert!(res[2] < 0.05, "{res:?}");
    assert!(res[2] < 0.6 * res[0], "{res:?}");
}

/// With (almost) no purchases both equations become linear transport
/// along `-δK` toward the ε-layer at 0, where `U ~ 1/ε`. Upwinding carries
/// the layer's value into the interior until `h <= ε`; from there on the
/// gap away from the layer converges at first order.
#[test]
fn decoupled_case_converges_once_the_layer_is_resolved() {
    let p = params(1e-9);
    let mut gaps = Vec::new();
    for n in [60_001, 120_001] {
        let g = Grid1D::new(60.0, n).unwrap();
        let sol = solve_hjb(&p, &g, &SolverOptions::default()).unwrap();
        let u = solve_master_1d(&p, &g, &SolverOptions::default()).unwrap();
        let full = potential_check(&sol, &u).unwrap();
        let d = sol.derivative();
        let away = (1..g.len() - 1)
            .filter(|&i| g.nodes()[i] >= 1.0)
            .map(|i| (d[i] - u.values[i]).abs())
            .fold(0.0, f64::max);
        assert!(full >= away);
        gaps.push(away);
    }
    let ratio = gaps[1] / gaps[0];
    assert!((0.4..=0.6).contains(&ratio), "{gaps:?}");
}
