//! Deterministic master equation on the half line.
//!
//! The unknown is the value `U(K)` of one unit of real hashrate when the
//! aggregate real hashrate is `K`:
//!
//! ```text
//! 0 = -(r+δ) U + (-δK + λU) U' + 1/(K+ε) - c      on [0, k_max]
//! ```
//!
//! The transport term is upwinded node by node from the sign of the
//! current drift `-δK + λU`. No boundary data is used: at a converged
//! solution the drift points into the domain at both ends, which is
//! checked and reported as [`Error::OutwardDrift`] otherwise.
//!
//! Steady states are reached by linearly implicit pseudo-time stepping.
//! The first step is CFL-sized (`cfl * h / max|drift|`) and the step then
//! grows with the residual ratio, so the march turns into Newton's method
//! on the upwind discretization once the upwind directions settle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pseudo_time_march, Tridiag};
use crate::model::{
    unit_reward, EquilibriumReport, Grid1D, ModelParams, Trajectory, ValueFunction1D,
};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions<T> {
    /// Sup-norm residual threshold.
    pub tol: T,
    /// Cap on pseudo-time steps (outer sweeps for the multi-dimensional solvers).
    pub max_iters: usize,
    /// Safety factor on the first pseudo-time step, in (0, 1].
    pub cfl: T,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-8),
            max_iters: 2000,
            cfl: T::lit(0.5),
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn validate(self) -> Result<Self> {
        if !(self.tol > T::zero()) {
            return Err(crate::error::invalid("tol", "must be > 0"));
        }
        if self.max_iters == 0 {
            return Err(crate::error::invalid("max_iters", "must be >= 1"));
        }
        if !(self.cfl > T::zero() && self.cfl <= T::one()) {
            return Err(crate::error::invalid("cfl", "must lie in (0, 1]"));
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats<T> {
    pub residual: T,
    pub iterations: usize,
}

/// How the value of a unit of hashrate translates into hardware purchases.
pub(crate) trait Response<T>: Sync {
    fn rate(&self, u: T) -> T;
    fn slope(&self, u: T) -> T;
}

/// `λ U`: machines can be bought and sold.
pub(crate) struct Linear<T>(pub T);

impl<T: Real> Response<T> for Linear<T> {
    #[inline]
    fn rate(&self, u: T) -> T {
        self.0 * u
    }
    #[inline]
    fn slope(&self, _u: T) -> T {
        self.0
    }
}

/// `(U)_+ / η`: machines can only be bought.
pub(crate) struct PositivePart<T>(pub T);

impl<T: Real> Response<T> for PositivePart<T> {
    #[inline]
    fn rate(&self, u: T) -> T {
        if u > T::zero() {
            self.0 * u
        } else {
            T::zero()
        }
    }
    #[inline]
    fn slope(&self, u: T) -> T {
        if u > T::zero() {
            self.0
        } else {
            T::zero()
        }
    }
}

/// Upwind side at node `i` of `n` for drift `b`: forward unless the drift
/// is negative, with the boundary nodes forced inward. Zero drift is
/// treated as forward.
#[inline]
pub(crate) fn forward_side<T: Real>(i: usize, n: usize, b: T) -> bool {
    i == 0 || (i + 1 < n && b >= T::zero())
}

/// One line of the transport equation
/// `0 = -decay U + (-δK + R(U)) U' + src` on a uniform grid.
pub(crate) struct TransportLine<'a, T, R> {
    pub k: &'a [T],
    pub h: T,
    pub delta: T,
    pub decay: T,
    pub src: &'a [T],
    pub resp: &'a R,
}

impl<T: Real, R: Response<T>> TransportLine<'_, T, R> {
    #[inline]
    pub fn drift(&self, i: usize, u: T) -> T {
        self.resp.rate(u) - self.delta * self.k[i]
    }

    /// Residual at node `i`.
    #[inline]
    pub fn residual_at(&self, u: &[T], i: usize) -> T {
        let n = u.len();
        let b = self.drift(i, u[i]);
        let d = if forward_side(i, n, b) {
            (u[i + 1] - u[i]) / self.h
        } else {
            (u[i] - u[i - 1]) / self.h
        };
        -self.decay * u[i] + b * d + self.src[i]
    }

    /// Fills `F(u)` and `-∂F/∂u`; returns `|F|_∞`.
    pub fn fill(&self, u: &[T], sys: &mut Tridiag<T>) -> T {
        let n = u.len();
        let h = self.h;
        let mut res = T::zero();
        for i in 0..n {
            let b = self.drift(i, u[i]);
            let fwd = forward_side(i, n, b);
            let d = if fwd {
                (u[i + 1] - u[i]) / h
            } else {
                (u[i] - u[i - 1]) / h
            };
            let f = -self.decay * u[i] + b * d + self.src[i];
            // Dropping a positive slope term keeps the step matrix an
            // M-matrix on non-monotone iterates.
            let s = (self.resp.slope(u[i]) * d).min(T::zero());
            sys.rhs[i] = f;
            if fwd {
                sys.diag[i] = self.decay - s + b / h;
                sys.sup[i] = -b / h;
                sys.sub[i] = T::zero();
            } else {
                sys.diag[i] = self.decay - s - b / h;
                sys.sub[i] = b / h;
                sys.sup[i] = T::zero();
            }
            res = res.max(f.abs());
        }
        res
    }
}

/// Reward net of cost at every node.
pub(crate) fn flow_payoff<T: Real>(p: &ModelParams<T>, g: &Grid1D<T>) -> Vec<T> {
    let h = g.spacing();
    g.nodes()
        .iter()
        .map(|&k| unit_reward(k, p.eps, h) - p.c)
        .collect()
}

/// Zero-drift value `(1/(K+ε) - c)/(r+δ)`, exact at stationary points.
pub(crate) fn zero_drift_guess<T: Real>(p: &ModelParams<T>, g: &Grid1D<T>) -> Vec<T> {
    let rho = p.discount();
    flow_payoff(p, g).into_iter().map(|f| f / rho).collect()
}

pub(crate) fn solve_transport_1d<T: Real, R: Response<T>>(
    p: &ModelParams<T>,
    g: &Grid1D<T>,
    resp: &R,
    mut u: Vec<T>,
    o: &SolverOptions<T>,
) -> Result<(ValueFunction1D<T>, SolveStats<T>)> {
    let o = o.validate()?;
    if g.len() != u.len() {
        return Err(Error::GridMismatch("initial guess length".into()));
    }
    let src = flow_payoff(p, g);
    let line = TransportLine {
        k: g.nodes(),
        h: g.spacing(),
        delta: p.delta,
        decay: p.discount(),
        src: &src,
        resp,
    };
    let max_b = (0..u.len())
        .map(|i| line.drift(i, u[i]).abs())
        .fold(T::epsilon(), T::max);
    let dtau0 = o.cfl * line.h / max_b;
    let stats = pseudo_time_march(
        &mut u,
        |u, sys| line.fill(u, sys),
        dtau0,
        o.tol,
        o.max_iters,
    );
    if !stats.converged {
        return Err(Error::NoConvergence {
            iterations: stats.iterations,
            residual: stats.residual.as_f64(),
        });
    }
    let n = u.len();
    if line.drift(0, u[0]) < T::zero() {
        return Err(Error::OutwardDrift { node: 0, k: 0.0 });
    }
    if line.drift(n - 1, u[n - 1]) > T::zero() {
        return Err(Error::OutwardDrift {
            node: n - 1,
            k: g.k_max().as_f64(),
        });
    }
    let value = ValueFunction1D::new(g.clone(), u)?;
    Ok((
        value,
        SolveStats {
            residual: stats.residual,
            iterations: stats.iterations,
        },
    ))
}

pub(crate) fn check_domain<T: Real>(p: &ModelParams<T>, g: &Grid1D<T>) -> Result<()> {
    if !(g.k_max() > p.breakeven()) {
        return Err(Error::InvalidGrid(format!(
            "k_max = {} must exceed 1/c - eps = {}",
            g.k_max(),
            p.breakeven()
        )));
    }
    Ok(())
}

/// Solves the deterministic master equation on `g`.
pub fn solve_master_1d<T: Real>(
    p: &ModelParams<T>,
    g: &Grid1D<T>,
    o: &SolverOptions<T>,
) -> Result<ValueFunction1D<T>> {
    solve_master_1d_with_stats(p, g, o).map(|(u, _)| u)
}

pub fn solve_master_1d_with_stats<T: Real>(
    p: &ModelParams<T>,
    g: &Grid1D<T>,
    o: &SolverOptions<T>,
) -> Result<(ValueFunction1D<T>, SolveStats<T>)> {
    let p = p.validate()?;
    check_domain(&p, g)?;
    solve_transport_1d(&p, g, &Linear(p.lam), zero_drift_guess(&p, g), o)
}

/// Sup norm of the discretized master equation evaluated at `u`.
pub fn master_residual_1d<T: Real>(p: &ModelParams<T>, u: &ValueFunction1D<T>) -> T {
    transport_residual(p, u, &Linear(p.lam))
}

pub(crate) fn transport_residual<T: Real, R: Response<T>>(
    p: &ModelParams<T>,
    u: &ValueFunction1D<T>,
    resp: &R,
) -> T {
    let src = flow_payoff(p, &u.grid);
    let line = TransportLine {
        k: u.grid.nodes(),
        h: u.grid.spacing(),
        delta: p.delta,
        decay: p.discount(),
        src: &src,
        resp,
    };
    (0..u.values.len())
        .map(|i| line.residual_at(&u.values, i).abs())
        .fold(T::zero(), T::max)
}

/// Stationary real hashrate of the baseline game in closed form.
///
/// Positive root of `δK² + (δε + cλ/(r+δ))K + λ(cε - 1)/(r+δ) = 0`,
/// evaluated in the cancellation-free form
/// `2λ(1-cε)/(r+δ) / (B + sqrt(B² + 4δλ(1-cε)/(r+δ)))` with
/// `B = δε + cλ/(r+δ)`. Returns 0 when `cε >= 1`. Parameters are not
/// validated here.
pub fn stationary_state_closed_form<T: Real>(p: &ModelParams<T>) -> T {
    let rho = p.discount();
    let slack = T::one() - p.c * p.eps;
    if !(slack > T::zero()) {
        return T::zero();
    }
    let b = p.delta * p.eps + p.c * p.lam / rho;
    let q = p.lam * slack / rho;
    let four = T::lit(4.0);
    let two = T::lit(2.0);
    two * q / (b + (b * b + four * p.delta * q).sqrt())
}

/// Stationary hashrate, unit value `δK*/λ` and total value `δK*²/λ`.
pub fn stationary_report<T: Real>(p: &ModelParams<T>) -> Result<EquilibriumReport<T>> {
    let p = p.validate()?;
    let k_star = stationary_state_closed_form(&p);
    let u_star = p.delta * k_star / p.lam;
    let pi_star = u_star * k_star;
    // residual of the stationary identity U* = (1/(K*+ε) - c)/(r+δ)
    let residual = (u_star - ((k_star + p.eps).recip() - p.c) / p.discount()).abs();
    Ok(EquilibriumReport {
        k_star,
        u_star,
        pi_star,
        residual_norm: residual,
        iterations: 0,
    })
}

/// Equilibrium drift of the real hashrate, `-δK + λu`.
#[inline]
pub fn drift<T: Real>(k: T, u: T, p: &ModelParams<T>) -> T {
    -p.delta * k + p.lam * u
}

/// Root of `λU(K) = δK` on the piecewise-linear interpolant of `u`.
pub fn drift_root<T: Real>(p: &ModelParams<T>, u: &ValueFunction1D<T>) -> Result<T> {
    response_root(u, p.delta, &Linear(p.lam))
}

pub(crate) fn response_root<T: Real, R: Response<T>>(
    u: &ValueFunction1D<T>,
    delta: T,
    resp: &R,
) -> Result<T> {
    let k = u.grid.nodes();
    let w = |i: usize| resp.rate(u.values[i]) - delta * k[i];
    if w(0) <= T::zero() {
        return Ok(T::zero());
    }
    let n = k.len();
    let cell = (0..n - 1)
        .find(|&i| w(i) > T::zero() && w(i + 1) <= T::zero())
        .ok_or_else(|| Error::NoRoot("drift stays positive up to k_max".into()))?;
    let f = |x: T| resp.rate(u.eval(x)) - delta * x;
    Ok(bisect(f, k[cell], k[cell + 1]))
}

/// Bisection for a decreasing function with `f(lo) > 0 >= f(hi)`, run to
/// floating-point resolution.
pub(crate) fn bisect<T: Real>(f: impl Fn(T) -> T, mut lo: T, mut hi: T) -> T {
    let two = T::lit(2.0);
    for _ in 0..200 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if f(hi).abs() < f(lo).abs() {
        hi
    } else {
        lo
    }
}

fn check_step<T: Real>(horizon: T, dt: T) -> Result<usize> {
    if !(dt > T::zero()) {
        return Err(crate::error::invalid("dt", "must be > 0"));
    }
    if !(horizon >= T::zero()) {
        return Err(crate::error::invalid("horizon", "must be >= 0"));
    }
    Ok((horizon / dt).ceil().to_usize().unwrap_or(0))
}

/// Explicit Euler integration of `dK = (-δK + λU(K)) dt`.
///
/// `U` is interpolated linearly; `K` is clamped at 0 from below. The last
/// step is shortened to land on `horizon`.
pub fn simulate_trajectory<T: Real>(
    p: &ModelParams<T>,
    u: &ValueFunction1D<T>,
    k0: T,
    horizon: T,
    dt: T,
) -> Result<Trajectory<T>> {
    integrate_1d(u, k0, horizon, dt, |k, uk| drift(k, uk, p))
}

pub(crate) fn integrate_1d<T: Real>(
    u: &ValueFunction1D<T>,
    k0: T,
    horizon: T,
    dt: T,
    rate: impl Fn(T, T) -> T,
) -> Result<Trajectory<T>> {
    let steps = check_step(horizon, dt)?;
    let k_max = u.grid.k_max();
    if !(k0 >= T::zero() && k0 <= k_max) {
        return Err(Error::LeftDomain {
            t: 0.0,
            value: k0.as_f64(),
            lo: 0.0,
            hi: k_max.as_f64(),
        });
    }
    let mut path = Trajectory::new(vec!["K"]);
    path.times.reserve(steps + 1);
    path.states.reserve(steps + 1);
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
        k = (k + step * rate(k, u.eval(k))).max(T::zero());
        t = t_next;
        if k > k_max {
            return Err(Error::LeftDomain {
                t: t.as_f64(),
                value: k.as_f64(),
                lo: 0.0,
                hi: k_max.as_f64(),
            });
        }
        path.push(t, vec![k]);
    }
    Ok(path)
}

/// Discounted flow value along the equilibrium path started at `k0`.
///
/// Integrates `e^{-(r+δ)t} (1/(K_t+ε) - c)` with the trapezoid rule along
/// [`simulate_trajectory`]. Truncation at `horizon` must be negligible:
/// `e^{-(r+δ) horizon} <= 1e-10`. Parameters are not validated, so
/// degenerate calibrations (e.g. `cε = 1`) can be evaluated.
pub fn value_oracle<T: Real>(
    p: &ModelParams<T>,
    u: &ValueFunction1D<T>,
    k0: T,
    horizon: T,
    dt: T,
) -> Result<T> {
    let rho = p.discount();
    if (-rho * horizon).exp() > T::lit(1e-10) {
        return Err(crate::error::invalid(
            "horizon",
            format!("e^(-(r+delta) horizon) must be <= 1e-10, horizon = {horizon}"),
        ));
    }
    let path = simulate_trajectory(p, u, k0, horizon, dt)?;
    let h = u.grid.spacing();
    let integrand = |t: T, k: T| (-rho * t).exp() * (unit_reward(k, p.eps, h) - p.c);
    let half = T::lit(0.5);
    let total =
        path.times
            .windows(2)
            .zip(path.states.windows(2))
            .fold(T::zero(), |acc, (ts, ks)| {
                acc + half
                    * (ts[1] - ts[0])
                    * (integrand(ts[0], ks[0][0]) + integrand(ts[1], ks[1][0]))
            });
    Ok(total)
}
