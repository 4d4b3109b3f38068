//! Potential formulation: a planner's HJB equation whose gradient is the
//! equilibrium value.
//!
//! ```text
//! 0 = -rΦ - δK Φ' + (λ/2)(Φ')² + ln(K+ε) - cK     on [0, k_max]
//! ```
//!
//! Differentiating in `K` gives back the master equation for `U = Φ'`
//! (the transport term must carry a derivative for this to hold).
//!
//! The Hamiltonian is written as a control problem,
//! `-δKq + (λ/2)q² = max_a ((-δK + a) q - a²/(2λ))`, discretized with the
//! upwind choice between forward, backward and zero drift, and solved by
//! policy iteration. The drift may not leave `[0, k_max]` (state
//! constraints), so the boundary nodes only consider inward or zero drift.

use crate::det1d::SolverOptions;
use crate::error::{invalid, Error, Result};
use crate::linalg::Tridiag;
use crate::model::{Grid1D, ModelParams, ValueFunction1D};
use crate::scalar::Real;

/// Planner value on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSolution<T> {
    pub grid: Grid1D<T>,
    pub params: ModelParams<T>,
    pub phi_values: Vec<T>,
    pub residual: T,
    pub policy_iterations: usize,
}

impl<T: Real> PotentialSolution<T> {
    /// Centered differences at interior nodes, one-sided at the ends.
    pub fn derivative(&self) -> Vec<T> {
        let v = &self.phi_values;
        let n = v.len();
        let h = self.grid.spacing();
        let two = T::lit(2.0);
        (0..n)
            .map(|i| {
                if i == 0 {
                    (v[1] - v[0]) / h
                } else if i == n - 1 {
                    (v[n - 1] - v[n - 2]) / h
                } else {
                    (v[i + 1] - v[i - 1]) / (two * h)
                }
            })
            .collect()
    }

    /// Root of `λΦ'(K) = δK` on the interpolated centered derivative.
    pub fn drift_root(&self) -> Result<T> {
        let du = ValueFunction1D::new(self.grid.clone(), self.derivative())?;
        crate::det1d::drift_root(&self.params, &du)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Choice {
    Forward,
    Backward,
    Still,
}

/// Chosen upwind branch at node `i` and its Hamiltonian value.
#[inline]
fn best<T: Real>(phi: &[T], i: usize, k: T, h: T, p: &ModelParams<T>) -> (Choice, T, T) {
    let n = phi.len();
    let half = T::lit(0.5);
    // zero drift needs purchases a = δK at cost a²/(2λ)
    let a_still = p.delta * k;
    let mut pick = (Choice::Still, -a_still * a_still / (p.lam + p.lam), a_still);
    if i + 1 < n {
        let q = (phi[i + 1] - phi[i]) / h;
        let b = p.lam * q - p.delta * k;
        let val = -p.delta * k * q + half * p.lam * q * q;
        if b > T::zero() && val > pick.1 {
            pick = (Choice::Forward, val, p.lam * q);
        }
    }
    if i > 0 {
        let q = (phi[i] - phi[i - 1]) / h;
        let b = p.lam * q - p.delta * k;
        let val = -p.delta * k * q + half * p.lam * q * q;
        if b < T::zero() && val > pick.1 {
            pick = (Choice::Backward, val, p.lam * q);
        }
    }
    pick
}

fn reward<T: Real>(p: &ModelParams<T>, g: &Grid1D<T>) -> Vec<T> {
    g.nodes()
        .iter()
        .map(|&k| (k + p.eps).ln() - p.c * k)
        .collect()
}

/// Sup norm of the upwind HJB residual.
pub fn hjb_residual<T: Real>(sol: &PotentialSolution<T>) -> T {
    let p = &sol.params;
    let f = reward(p, &sol.grid);
    let k = sol.grid.nodes();
    let h = sol.grid.spacing();
    let phi = &sol.phi_values;
    (0..phi.len())
        .map(|i| (-p.r * phi[i] + best(phi, i, k[i], h, p).1 + f[i]).abs())
        .fold(T::zero(), T::max)
}

/// Solves the potential HJB equation by policy iteration. Requires `ε > 0`.
pub fn solve_hjb<T: Real>(
    p: &ModelParams<T>,
    g: &Grid1D<T>,
    o: &SolverOptions<T>,
) -> Result<PotentialSolution<T>> {
    let p = p.validate()?;
    let o = o.validate()?;
    if !(p.eps > T::zero()) {
        return Err(invalid("eps", "must be > 0 for the logarithmic reward"));
    }
    crate::det1d::check_domain(&p, g)?;
    let n = g.len();
    let h = g.spacing();
    let k = g.nodes();
    let f = reward(&p, g);
    let mut sys = Tridiag::zeros(n);
    let mut scratch = Vec::with_capacity(n);
    // initial policy: no purchases, pure depreciation (backward upwind)
    let mut policy: Vec<(Choice, T)> = (0..n)
        .map(|i| {
            if i == 0 {
                (Choice::Still, T::zero())
            } else {
                (Choice::Backward, T::zero())
            }
        })
        .collect();
    let mut phi = vec![T::zero(); n];
    let mut iterations = 0;
    let two = T::lit(2.0);
    loop {
        iterations += 1;
        for i in 0..n {
            let (choice, a) = policy[i];
            let b = a - p.delta * k[i];
            let cost = a * a / (two * p.lam);
            sys.rhs[i] = f[i] - cost;
            sys.sub[i] = T::zero();
            sys.sup[i] = T::zero();
            match choice {
                Choice::Forward => {
                    sys.diag[i] = p.r + b / h;
                    sys.sup[i] = -b / h;
                }
                Choice::Backward => {
                    sys.diag[i] = p.r - b / h;
                    sys.sub[i] = b / h;
                }
                Choice::Still => sys.diag[i] = p.r,
            }
        }
        phi.copy_from_slice(sys.solve_in_place(&mut scratch));
        let mut changed = false;
        for i in 0..n {
            let (choice, _, a) = best(&phi, i, k[i], h, &p);
            if choice != policy[i].0 || a != policy[i].1 {
                changed = true;
            }
            policy[i] = (choice, a);
        }
        let sol = PotentialSolution {
            grid: g.clone(),
            params: p,
            phi_values: phi.clone(),
            residual: T::zero(),
            policy_iterations: iterations,
        };
        let residual = hjb_residual(&sol);
        if residual <= o.tol || !changed {
            if residual > o.tol {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: residual.as_f64(),
                });
            }
            return Ok(PotentialSolution { residual, ..sol });
        }
        if iterations >= o.max_iters {
            return Err(Error::NoConvergence {
                iterations,
                residual: residual.as_f64(),
            });
        }
    }
}

/// `sup |centered Φ' - U|` over interior nodes.
pub fn potential_check<T: Real>(phi: &PotentialSolution<T>, u: &ValueFunction1D<T>) -> Result<T> {
    if phi.grid != u.grid {
        return Err(Error::GridMismatch(
            "potential and value must share the grid".into(),
        ));
    }
    let d = phi.derivative();
    let n = d.len();
    Ok((1..n - 1)
        .map(|i| (d[i] - u.values[i]).abs())
        .fold(T::zero(), T::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::det1d::{solve_master_1d, stationary_state_closed_form};

    fn params() -> ModelParams<f64> {
        ModelParams {
            eps: 1e-3,
            ..ModelParams::baseline()
        }
    }

    /// `Φ(K) = ∫ e^{-rt} (ln(K e^{-δt} + ε) - c K e^{-δt}) dt` for λ → 0,
    /// by the composite Simpson rule.
    fn frozen_potential(p: &ModelParams<f64>, k: f64) -> f64 {
        let (t_end, m) = (800.0, 400_000);
        let dt = t_end / m as f64;
        let f = |t: f64| {
            let kt = k * (-p.delta * t).exp();
            (-p.r * t).exp() * ((kt + p.eps).ln() - p.c * kt)
        };
        let mut s = f(0.0) + f(t_end);
        for j in 1..m {
            s += f(j as f64 * dt) * if j % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * dt / 3.0
    }

    #[test]
    fn baseline_potential_reproduces_stationary_state() {
        let p = params();
        let g = Grid1D::for_params(&p, 4000).unwrap();
        let sol = solve_hjb(&p, &g, &SolverOptions::default()).unwrap();
        assert!(sol.residual <= 1e-8);
        assert!(hjb_residual(&sol) <= 1e-8);
        let k = sol.drift_root().unwrap();
        assert!(
            (k - stationary_state_closed_form(&p)).abs() < 1e-2,
            "root {k}"
        );
    }

    #[test]
    fn frictionless_limit_matches_characteristics() {
        let p = ModelParams {
            lam: 1e-9,
            ..params()
        };
        // the ε-layer at K = 0 must be resolved: h ≈ ε/2
        let g = Grid1D::new(60.0, 120_001).unwrap();
        let sol = solve_hjb(&p, &g, &SolverOptions::default()).unwrap();
        let phi = ValueFunction1D::new(g.clone(), sol.phi_values.clone()).unwrap();
        for k in [1.0, 5.0, 20.0] {
            let exact = frozen_potential(&p, k);
            assert!(
                (phi.eval(k) - exact).abs() < 1e-2 * exact.abs().max(1.0),
                "K={k}"
            );
        }
    }

    /// Away from the ε-layer at `K = 0` the two schemes agree to first order.
    #[test]
    fn gradient_matches_master_solution() {
        let p = params();
        let mut gaps = Vec::new();
        for n in [2000, 4000, 8000] {
            let g = Grid1D::for_params(&p, n).unwrap();
            let sol = solve_hjb(&p, &g, &SolverOptions::default()).unwrap();
            let u = solve_master_1d(&p, &g, &SolverOptions::default()).unwrap();
            let d = sol.derivative();
            let gap = (1..n - 1)
                .filter(|&i| g.nodes()[i] >= 1.0)
                .map(|i| (d[i] - u.values[i]).abs())
                .fold(0.0, f64::max);
            assert!(potential_check(&sol, &u).unwrap() >= gap);
            gaps.push((gap, g.spacing()));
        }
        for &(gap, h) in &gaps {
            assert!(gap <= 5.0 * h, "gap {gap} vs h {h}");
        }
        for w in gaps.windows(2) {
            let ratio = w[1].0 / w[0].0;
            assert!((0.4..=0.6).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn requires_positive_eps_and_matching_grids() {
        let p = ModelParams::<f64>::baseline();
        let g = Grid1D::for_params(&p, 100).unwrap();
        assert!(solve_hjb(&p, &g, &SolverOptions::default()).is_err());
        let q = params();
        let sol = solve_hjb(
            &q,
            &Grid1D::for_params(&q, 100).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        let u = solve_master_1d(
            &q,
            &Grid1D::for_params(&q, 101).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(matches!(
            potential_check(&sol, &u),
            Err(Error::GridMismatch(_))
        ));
    }
}
