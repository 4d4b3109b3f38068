//! Free entry without resale: the penalized master equation and its
//! obstacle limit.
//!
//! Purchases respond to the positive part of the value, `(U)_+ / η`. As
//! `η → 0` the value is pinned at zero wherever new machines would still
//! be profitable, which gives the complementarity problem
//!
//! ```text
//! max((r+δ)U + δK U' - 1/(K+ε) + c, U) = 0.
//! ```
//!
//! In the limit the only drift left is depreciation `-δK`, so the upwind
//! stencil always looks left and a single left-to-right projected
//! Gauss–Seidel sweep solves the discrete problem exactly. The solver
//! nevertheless repeats sweeps until the update vanishes, which doubles as
//! a check.

use serde::{Deserialize, Serialize};

use crate::det1d::{
    check_domain, flow_payoff, response_root, solve_transport_1d, stationary_state_closed_form,
    transport_residual, zero_drift_guess, PositivePart, SolveStats, SolverOptions,
};
use crate::error::{invalid, Error, Result};
use crate::model::{Grid1D, ModelParams, Trajectory, ValueFunction1D};
use crate::scalar::{sup_distance, Real};

/// Solution of the penalized equation for one `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedSolution<T> {
    pub eta: T,
    pub u: ValueFunction1D<T>,
    /// Stationary state from the closed form with `λ = 1/η`.
    pub k_star: T,
    /// Root of `(U)_+/η = δK` on the solved value.
    pub k_star_numeric: T,
    pub stats: SolveStats<T>,
}

/// Solution of the obstacle problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleSolution<T> {
    pub u: ValueFunction1D<T>,
    /// `inf {K : U(K) < 0}` on the grid: the last node where `U = 0`.
    pub k_star: T,
    /// Sup norm of the complementarity residual.
    pub residual: T,
    pub sweeps: usize,
}

/// One row of an `η`-continuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow<T> {
    pub eta: T,
    pub k_star_eta: T,
    pub sup_gap: T,
}

fn check_eta<T: Real>(eta: T) -> Result<()> {
    if !(eta > T::zero()) || !eta.is_finite() {
        return Err(invalid("eta", format!("must be finite and > 0, got {eta}")));
    }
    Ok(())
}

fn penalized_params<T: Real>(p: &ModelParams<T>, eta: T) -> ModelParams<T> {
    ModelParams {
        lam: eta.recip(),
        ..*p
    }
}

/// Solves the penalized master equation with purchase rate `(U)_+/η`.
pub fn solve_penalized<T: Real>(
    p: &ModelParams<T>,
    eta: T,
    g: &Grid1D<T>,
    o: &SolverOptions<T>,
) -> Result<PenalizedSolution<T>> {
    let p = p.validate()?;
    check_domain(&p, g)?;
    solve_penalized_from(&p, eta, g, zero_drift_guess(&p, g), o)
}

fn solve_penalized_from<T: Real>(
    p: &ModelParams<T>,
    eta: T,
    g: &Grid1D<T>,
    guess: Vec<T>,
    o: &SolverOptions<T>,
) -> Result<PenalizedSolution<T>> {
    check_eta(eta)?;
    let resp = PositivePart(eta.recip());
    let (u, stats) = solve_transport_1d(p, g, &resp, guess, o)?;
    let k_star_numeric = response_root(&u, p.delta, &resp)?;
    Ok(PenalizedSolution {
        eta,
        k_star: stationary_state_closed_form(&penalized_params(p, eta)),
        k_star_numeric,
        u,
        stats,
    })
}

/// Residual of the penalized equation at a solution.
pub fn penalized_residual<T: Real>(p: &ModelParams<T>, sol: &PenalizedSolution<T>) -> T {
    transport_residual(p, &sol.u, &PositivePart(sol.eta.recip()))
}

/// Nodewise complementarity residual `max(LU, U)` of a candidate.
pub fn complementarity_residual<T: Real>(p: &ModelParams<T>, u: &ValueFunction1D<T>) -> Vec<T> {
    let f = flow_payoff(p, &u.grid);
    let k = u.grid.nodes();
    let h = u.grid.spacing();
    let rho = p.discount();
    let v = &u.values;
    (0..v.len())
        .map(|i| {
            let slope = if i == 0 {
                T::zero()
            } else {
                (v[i] - v[i - 1]) / h
            };
            let pde = rho * v[i] + p.delta * k[i] * slope - f[i];
            pde.max(v[i])
        })
        .collect()
}

/// Solves the obstacle problem by projected Gauss–Seidel sweeps.
pub fn solve_obstacle<T: Real>(
    p: &ModelParams<T>,
    g: &Grid1D<T>,
    o: &SolverOptions<T>,
) -> Result<ObstacleSolution<T>> {
    let p = p.validate()?;
    let o = o.validate()?;
    check_domain(&p, g)?;
    let f = flow_payoff(&p, g);
    let k = g.nodes();
    let h = g.spacing();
    let rho = p.discount();
    let mut u = vec![T::zero(); g.len()];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut change = T::zero();
        for i in 0..u.len() {
            let a = p.delta * k[i] / h;
            let left = if i == 0 { T::zero() } else { u[i - 1] };
            let next = ((f[i] + a * left) / (rho + a)).min(T::zero());
            change = change.max((next - u[i]).abs());
            u[i] = next;
        }
        if change <= o.tol {
            break;
        }
        if sweeps >= o.max_iters {
            return Err(Error::NoConvergence {
                iterations: sweeps,
                residual: change.as_f64(),
            });
        }
    }
    let u = ValueFunction1D::new(g.clone(), u)?;
    let residual = complementarity_residual(&p, &u)
        .into_iter()
        .fold(T::zero(), |m, x| m.max(x.abs()));
    let k_star = match u.first_negative() {
        Some(0) => T::zero(),
        Some(i) => k[i - 1],
        None => g.k_max(),
    };
    Ok(ObstacleSolution {
        u,
        k_star,
        residual,
        sweeps,
    })
}

/// Limit dynamics of the free-entry model.
///
/// Below `k_star` the hashrate jumps to `k_star` at once (recorded as two
/// samples at `t = 0`); above it, it decays as `k0 e^{-δt}` until it hits
/// `k_star` and stays there. The path is sampled every `dt`, with the
/// hitting time inserted as an extra sample.
pub fn simulate_obstacle_trajectory<T: Real>(
    p: &ModelParams<T>,
    sol: &ObstacleSolution<T>,
    k0: T,
    horizon: T,
    dt: T,
) -> Result<Trajectory<T>> {
    if !(k0 >= T::zero()) {
        return Err(invalid("k0", "must be >= 0"));
    }
    if !(dt > T::zero()) {
        return Err(invalid("dt", "must be > 0"));
    }
    if !(horizon >= T::zero()) {
        return Err(invalid("horizon", "must be >= 0"));
    }
    let ks = sol.k_star;
    let mut path = Trajectory::new(vec!["K"]);
    path.push(T::zero(), vec![k0]);
    if k0 < ks {
        path.push(T::zero(), vec![ks]);
    }
    let hit = if k0 > ks && ks > T::zero() {
        (k0 / ks).ln() / p.delta
    } else if k0 > ks {
        T::infinity()
    } else {
        T::zero()
    };
    let at = |t: T| {
        if t >= hit {
            ks
        } else {
            k0 * (-p.delta * t).exp()
        }
    };
    let steps = (horizon / dt).ceil().to_usize().unwrap_or(0);
    let mut prev = T::zero();
    for s in 1..=steps {
        let t = if s == steps {
            horizon
        } else {
            dt * T::of_usize(s)
        };
        if hit > prev && hit < t {
            path.push(hit, vec![ks]);
        }
        path.push(t, vec![at(t)]);
        prev = t;
    }
    Ok(path)
}

/// Backward-Euler integration of `dK = (-δK + (U(K))_+/η) dt`.
///
/// The purchase rate is stiff for small `η`, so each step solves the
/// implicit scalar equation; its left side is strictly increasing in the
/// new state, and bisection finds it.
pub fn simulate_penalized_trajectory<T: Real>(
    p: &ModelParams<T>,
    sol: &PenalizedSolution<T>,
    k0: T,
    horizon: T,
    dt: T,
) -> Result<Trajectory<T>> {
    if !(dt > T::zero()) {
        return Err(invalid("dt", "must be > 0"));
    }
    let k_max = sol.u.grid.k_max();
    if !(k0 >= T::zero() && k0 <= k_max) {
        return Err(Error::LeftDomain {
            t: 0.0,
            value: k0.as_f64(),
            lo: 0.0,
            hi: k_max.as_f64(),
        });
    }
    let resp = PositivePart(sol.eta.recip());
    let rate = |k: T| {
        use crate::det1d::Response;
        resp.rate(sol.u.eval(k)) - p.delta * k
    };
    let steps = (horizon / dt).ceil().to_usize().unwrap_or(0);
    let mut path = Trajectory::new(vec!["K"]);
    let mut k = k0;
    let mut t = T::zero();
    path.push(t, vec![k]);
    for s in 0..steps {
        let t_next = if s + 1 == steps {
            horizon
        } else {
            dt * T::of_usize(s + 1)
        };
        let step = t_next - t;
        // x - k - step * rate(x) is increasing; its root is bracketed by
        // [0, k_max] because the drift points inward at both ends.
        let g = |x: T| k + step * rate(x) - x;
        k = crate::det1d::bisect(g, T::zero(), k_max);
        t = t_next;
        path.push(t, vec![k]);
    }
    Ok(path)
}

/// Warm-started penalized solves along a decreasing `η` sequence, each
/// compared with the obstacle solution in sup norm.
pub fn convergence_study<T: Real>(
    p: &ModelParams<T>,
    etas: &[T],
    g: &Grid1D<T>,
    o: &SolverOptions<T>,
) -> Result<Vec<ConvergenceRow<T>>> {
    let p = p.validate()?;
    check_domain(&p, g)?;
    if etas.is_empty() {
        return Err(invalid("eta_sequence", "must not be empty"));
    }
    for &e in etas {
        check_eta(e)?;
    }
    if etas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("eta_sequence", "must be strictly decreasing"));
    }
    let obstacle = solve_obstacle(&p, g, o)?;
    let mut guess = zero_drift_guess(&p, g);
    let mut rows = Vec::with_capacity(etas.len());
    for &eta in etas {
        let sol = solve_penalized_from(&p, eta, g, guess, o)?;
        rows.push(ConvergenceRow {
            eta,
            k_star_eta: sol.k_star,
            sup_gap: sup_distance(&sol.u.values, &obstacle.u.values),
        });
        guess = sol.u.values;
    }
    Ok(rows)
}
