//! Master equation with a common price shock.
//!
//! The exchange-rate driver `p` follows `dP = α(P) dt + sqrt(2ν) dW` and
//! scales the reward to `g(p)/(K+ε)`. The value `U(K, p)` solves
//!
//! ```text
//! 0 = -(r+δ)U + (-δK + λU) ∂_K U + α ∂_p U + ν ∂_pp U + g(p)/(K+ε) - c
//! ```
//!
//! on `[0, k_max] × [p_min, p_max]`, with reflecting (homogeneous Neumann)
//! conditions at the price bounds. The scheme is upwind in `K` and in the
//! `α` term and centered in the diffusion, so it is monotone. It is solved
//! by alternating line relaxation: every `K`-line is solved by Newton with
//! the neighbouring price slices frozen, then every `p`-line with the
//! neighbouring hashrate nodes frozen, until the global residual is below
//! tolerance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::det1d::{forward_side, response_root, Linear, SolveStats, SolverOptions, TransportLine};
use crate::error::{invalid, Error, Result};
use crate::linalg::{pseudo_time_march, Tridiag};
use crate::model::{default_k_max, unit_reward, Grid1D, ModelParams, Trajectory, ValueFunction1D};
use crate::scalar::Real;

/// Drift `α(p)` of the price driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriceDrift<T> {
    Constant {
        a: T,
    },
    /// `a + b p`; `b < 0` gives an Ornstein–Uhlenbeck driver.
    Affine {
        a: T,
        b: T,
    },
}

impl<T: Real> PriceDrift<T> {
    #[inline]
    pub fn eval(&self, p: T) -> T {
        match *self {
            PriceDrift::Constant { a } => a,
            PriceDrift::Affine { a, b } => a + b * p,
        }
    }

    /// Absolute slope, zero for a constant drift.
    pub fn slope(&self) -> T {
        match *self {
            PriceDrift::Constant { .. } => T::zero(),
            PriceDrift::Affine { b, .. } => b.abs(),
        }
    }
}

/// Reward multiplier `g(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RewardMap<T> {
    /// `g ≡ 1`: the price does not affect the reward.
    Identity,
    /// `g(p) = min(max(e^p, εc), cap)`.
    ExpCapped { cap: T },
}

/// Specification of the common-noise state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceProcess<T> {
    pub drift: PriceDrift<T>,
    /// Diffusion intensity ν; the noise enters as `sqrt(2ν) dW`.
    pub nu: T,
    pub reward: RewardMap<T>,
    pub p_min: T,
    pub p_max: T,
}

impl<T: Real> PriceProcess<T> {
    pub fn validate(self, params: &ModelParams<T>) -> Result<Self> {
        if !(self.nu > T::zero()) || !self.nu.is_finite() {
            return Err(invalid(
                "nu",
                format!("must be finite and > 0, got {}", self.nu),
            ));
        }
        if !(self.p_min.is_finite() && self.p_max.is_finite() && self.p_min < self.p_max) {
            return Err(invalid("p_min", "need finite p_min < p_max"));
        }
        let finite = match self.drift {
            PriceDrift::Constant { a } => a.is_finite(),
            PriceDrift::Affine { a, b } => a.is_finite() && b.is_finite(),
        };
        if !finite {
            return Err(invalid("drift", "coefficients must be finite"));
        }
        if let RewardMap::ExpCapped { cap } = self.reward {
            if !(cap > T::zero()) || !cap.is_finite() || cap < params.eps * params.c {
                return Err(invalid(
                    "cap",
                    format!("must be finite, > 0 and >= eps*c, got {cap}"),
                ));
            }
        }
        Ok(self)
    }

    #[inline]
    pub fn g(&self, p: T, params: &ModelParams<T>) -> T {
        match self.reward {
            RewardMap::Identity => T::one(),
            RewardMap::ExpCapped { cap } => p.exp().max(params.eps * params.c).min(cap),
        }
    }

    /// Upper bound `A` of the reward multiplier.
    pub fn g_max(&self) -> T {
        match self.reward {
            RewardMap::Identity => T::one(),
            RewardMap::ExpCapped { cap } => cap,
        }
    }

    /// Folds `p` back into `[p_min, p_max]` (reflection).
    pub fn reflect(&self, mut p: T) -> T {
        let two = T::lit(2.0);
        for _ in 0..64 {
            if p < self.p_min {
                p = two * self.p_min - p;
            } else if p > self.p_max {
                p = two * self.p_max - p;
            } else {
                return p;
            }
        }
        p.max(self.p_min).min(self.p_max)
    }

    /// Default Euler–Maruyama step `1e-3 / max(δ, |b|)`.
    pub fn default_dt(&self, params: &ModelParams<T>) -> T {
        T::lit(1e-3) / params.delta.max(self.drift.slope())
    }
}

/// Default truncation of the hashrate axis under the reward cap `A`:
/// the one-dimensional default, widened to `1.25 A/c`.
pub fn default_k_max_2d<T: Real>(p: &ModelParams<T>, pp: &PriceProcess<T>) -> T {
    default_k_max(p).max(T::lit(1.25) * pp.g_max() / p.c)
}

/// Value sampled on the product grid; `values[j * nk + i]` is `U(K_i, p_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction2D<T> {
    pub grid_k: Grid1D<T>,
    pub grid_p: Grid1D<T>,
    pub values: Vec<T>,
}

impl<T: Real> ValueFunction2D<T> {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[j * self.grid_k.len() + i]
    }

    /// The price slice `U(·, p_j)`.
    pub fn slice(&self, j: usize) -> ValueFunction1D<T> {
        let nk = self.grid_k.len();
        ValueFunction1D {
            grid: self.grid_k.clone(),
            values: self.values[j * nk..(j + 1) * nk].to_vec(),
        }
    }

    /// Bilinear interpolation, clamped to the grid.
    pub fn eval(&self, k: T, p: T) -> T {
        let (i, wk) = self.grid_k.locate(k);
        let (j, wp) = self.grid_p.locate(p);
        let one = T::one();
        let lo = self.at(i, j) * (one - wk) + self.at(i + 1, j) * wk;
        let hi = self.at(i, j + 1) * (one - wk) + self.at(i + 1, j + 1) * wk;
        lo * (one - wp) + hi * wp
    }

    /// True when every price slice is non-increasing in `K` up to `slack`.
    pub fn slices_non_increasing(&self, slack: T) -> bool {
        (0..self.grid_p.len()).all(|j| self.slice(j).is_non_increasing(slack))
    }
}

/// Attractor curve `K*(p)`, one root per price node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCurve<T> {
    pub p: Vec<T>,
    pub k_star: Vec<T>,
}

impl<T: Real> TargetCurve<T> {
    /// Linear interpolation between price nodes, clamped at the ends.
    pub fn eval(&self, p: T) -> T {
        let n = self.p.len();
        if p <= self.p[0] {
            return self.k_star[0];
        }
        if p >= self.p[n - 1] {
            return self.k_star[n - 1];
        }
        let pos = self.p.partition_point(|&x| x <= p).min(n - 1);
        let (p0, p1) = (self.p[pos - 1], self.p[pos]);
        let w = (p - p0) / (p1 - p0);
        self.k_star[pos - 1] * (T::one() - w) + self.k_star[pos] * w
    }

    /// Checks `|ΔK*| <= λ|U(K*_j, p_{j+1}) - U(K*_j, p_j)|/δ + slack` between
    /// neighbouring nodes. The bound holds because `λU - δK` decreases in
    /// `K` at least as fast as `δK`.
    pub fn is_continuous(&self, u: &ValueFunction2D<T>, params: &ModelParams<T>, slack: T) -> bool {
        (0..self.p.len().saturating_sub(1)).all(|j| {
            let k = self.k_star[j];
            let du = (u.eval(k, self.p[j + 1]) - u.eval(k, self.p[j])).abs();
            (self.k_star[j + 1] - k).abs() <= params.lam * du / params.delta + slack
        })
    }
}

/// Coupling weights of a node to its lower and upper price neighbours.
pub(crate) fn price_weights<T: Real>(pp: &PriceProcess<T>, grid_p: &Grid1D<T>) -> Vec<(T, T)> {
    let n = grid_p.len();
    let hp = grid_p.spacing();
    let diff = pp.nu / (hp * hp);
    let two = T::lit(2.0);
    grid_p
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            if j == 0 {
                // mirrored ghost node; ∂_p U = 0 removes the α term
                (T::zero(), two * diff)
            } else if j == n - 1 {
                (two * diff, T::zero())
            } else {
                let a = pp.drift.eval(p);
                if a >= T::zero() {
                    (diff, diff + a / hp)
                } else {
                    (diff - a / hp, diff)
                }
            }
        })
        .collect()
}

struct Problem2D<'a, T> {
    params: &'a ModelParams<T>,
    k: &'a [T],
    nk: usize,
    np: usize,
    hk: T,
    weights: Vec<(T, T)>,
    /// `g(p_j) R(K_i) - c`
    source: Vec<T>,
}

impl<T: Real> Problem2D<'_, T> {
    #[inline]
    fn coupling(&self, u: &[T], i: usize, j: usize) -> T {
        let (wm, wp) = self.weights[j];
        let mut s = T::zero();
        if j > 0 {
            s += wm * u[(j - 1) * self.nk + i];
        }
        if j + 1 < self.np {
            s += wp * u[(j + 1) * self.nk + i];
        }
        s
    }

    fn residual_at(&self, u: &[T], i: usize, j: usize) -> T {
        let nk = self.nk;
        let p = self.params;
        let v = u[j * nk + i];
        let (wm, wp) = self.weights[j];
        let b = p.lam * v - p.delta * self.k[i];
        let d = if forward_side(i, nk, b) {
            (u[j * nk + i + 1] - v) / self.hk
        } else {
            (v - u[j * nk + i - 1]) / self.hk
        };
        -(p.discount() + wm + wp) * v + b * d + self.coupling(u, i, j) + self.source[j * nk + i]
    }

    fn residual(&self, u: &[T]) -> T {
        (0..self.np)
            .flat_map(|j| (0..self.nk).map(move |i| (i, j)))
            .map(|(i, j)| self.residual_at(u, i, j).abs())
            .fold(T::zero(), T::max)
    }

    fn relax_k_line(&self, u: &mut [T], j: usize, tol: T, scratch: &mut Vec<T>) {
        let nk = self.nk;
        let (wm, wp) = self.weights[j];
        scratch.clear();
        scratch.extend((0..nk).map(|i| self.source[j * nk + i] + self.coupling(u, i, j)));
        let resp = Linear(self.params.lam);
        let line = TransportLine {
            k: self.k,
            h: self.hk,
            delta: self.params.delta,
            decay: self.params.discount() + wm + wp,
            src: scratch,
            resp: &resp,
        };
        let row = &mut u[j * nk..(j + 1) * nk];
        pseudo_time_march(row, |v, sys| line.fill(v, sys), T::lit(1e6), tol, 50);
    }

    fn relax_p_line(&self, u: &mut [T], i: usize, tol: T, line: &mut Vec<T>) {
        let nk = self.nk;
        let np = self.np;
        let p = self.params;
        let rho = p.discount();
        let h = self.hk;
        line.clear();
        line.extend((0..np).map(|j| u[j * nk + i]));
        let left: Vec<T> = (0..np)
            .map(|j| if i > 0 { u[j * nk + i - 1] } else { T::zero() })
            .collect();
        let right: Vec<T> = (0..np)
            .map(|j| {
                if i + 1 < nk {
                    u[j * nk + i + 1]
                } else {
                    T::zero()
                }
            })
            .collect();
        let eval = |v: &[T], sys: &mut Tridiag<T>| {
            let mut res = T::zero();
            for j in 0..np {
                let (wm, wp) = self.weights[j];
                let b = p.lam * v[j] - p.delta * self.k[i];
                let fwd = forward_side(i, nk, b);
                let d = if fwd {
                    (right[j] - v[j]) / h
                } else {
                    (v[j] - left[j]) / h
                };
                let mut f = -(rho + wm + wp) * v[j] + b * d + self.source[j * nk + i];
                if j > 0 {
                    f += wm * v[j - 1];
                }
                if j + 1 < np {
                    f += wp * v[j + 1];
                }
                let s = (p.lam * d).min(T::zero());
                let upwind = if fwd { b / h } else { -b / h };
                sys.rhs[j] = f;
                sys.diag[j] = rho + wm + wp - s + upwind;
                sys.sub[j] = -wm;
                sys.sup[j] = -wp;
                res = res.max(f.abs());
            }
            res
        };
        pseudo_time_march(line, eval, T::lit(1e6), tol, 50);
        for (j, &v) in line.iter().enumerate() {
            u[j * nk + i] = v;
        }
    }
}

/// Solves the common-noise master equation on `grid_k × grid_p`.
pub fn solve_master_2d<T: Real>(
    params: &ModelParams<T>,
    pp: &PriceProcess<T>,
    grid_k: &Grid1D<T>,
    grid_p: &Grid1D<T>,
    o: &SolverOptions<T>,
) -> Result<(ValueFunction2D<T>, SolveStats<T>)> {
    let params = params.validate()?;
    let pp = pp.validate(&params)?;
    let o = o.validate()?;
    let bound = pp.g_max() / params.c;
    if !(grid_k.k_max() > bound) {
        return Err(Error::InvalidGrid(format!(
            "k_max = {} must exceed A/c = {bound}",
            grid_k.k_max()
        )));
    }
    if grid_p.lo() != pp.p_min || grid_p.k_max() != pp.p_max {
        return Err(Error::GridMismatch(
            "price grid must span [p_min, p_max]".into(),
        ));
    }
    let nk = grid_k.len();
    let np = grid_p.len();
    let hk = grid_k.spacing();
    let rho = params.discount();
    let mut source = Vec::with_capacity(nk * np);
    for &pj in grid_p.nodes() {
        let g = pp.g(pj, &params);
        source.extend(
            grid_k
                .nodes()
                .iter()
                .map(|&k| g * unit_reward(k, params.eps, hk) - params.c),
        );
    }
    let prob = Problem2D {
        params: &params,
        k: grid_k.nodes(),
        nk,
        np,
        hk,
        weights: price_weights(&pp, grid_p),
        source,
    };
    // zero-drift value of each frozen-price slice
    let mut u: Vec<T> = prob.source.iter().map(|&s| s / rho).collect();
    let inner_tol = o.tol * T::lit(1e-2);
    let mut scratch = Vec::with_capacity(nk.max(np));
    let mut res = prob.residual(&u);
    let mut sweeps = 0;
    while res > o.tol && sweeps < o.max_iters {
        sweeps += 1;
        for j in 0..np {
            prob.relax_k_line(&mut u, j, inner_tol, &mut scratch);
        }
        for i in 0..nk {
            prob.relax_p_line(&mut u, i, inner_tol, &mut scratch);
        }
        res = prob.residual(&u);
        if !res.is_finite() {
            break;
        }
    }
    if !(res <= o.tol) {
        return Err(Error::NoConvergence {
            iterations: sweeps,
            residual: res.as_f64(),
        });
    }
    for j in 0..np {
        let lo = u[j * nk];
        let hi = u[j * nk + nk - 1];
        if params.lam * lo < T::zero() {
            return Err(Error::OutwardDrift {
                node: j * nk,
                k: 0.0,
            });
        }
        if params.lam * hi - params.delta * grid_k.k_max() > T::zero() {
            return Err(Error::OutwardDrift {
                node: j * nk + nk - 1,
                k: grid_k.k_max().as_f64(),
            });
        }
    }
    Ok((
        ValueFunction2D {
            grid_k: grid_k.clone(),
            grid_p: grid_p.clone(),
            values: u,
        },
        SolveStats {
            residual: res,
            iterations: sweeps,
        },
    ))
}

/// Sup-norm residual of the discretized two-variable master equation.
pub fn master_residual_2d<T: Real>(
    params: &ModelParams<T>,
    pp: &PriceProcess<T>,
    u: &ValueFunction2D<T>,
) -> T {
    let nk = u.grid_k.len();
    let hk = u.grid_k.spacing();
    let mut source = Vec::with_capacity(u.values.len());
    for &pj in u.grid_p.nodes() {
        let g = pp.g(pj, params);
        source.extend(
            u.grid_k
                .nodes()
                .iter()
                .map(|&k| g * unit_reward(k, params.eps, hk) - params.c),
        );
    }
    Problem2D {
        params,
        k: u.grid_k.nodes(),
        nk,
        np: u.grid_p.len(),
        hk,
        weights: price_weights(pp, &u.grid_p),
        source,
    }
    .residual(&u.values)
}

/// Root of `λU(K, p_j) = δK` for every price node.
pub fn target_curve<T: Real>(
    u: &ValueFunction2D<T>,
    params: &ModelParams<T>,
) -> Result<TargetCurve<T>> {
    let resp = Linear(params.lam);
    let k_star = (0..u.grid_p.len())
        .map(|j| response_root(&u.slice(j), params.delta, &resp))
        .collect::<Result<Vec<_>>>()?;
    Ok(TargetCurve {
        p: u.grid_p.nodes().to_vec(),
        k_star,
    })
}

/// Euler–Maruyama path of `dK = (-δK + λU(K,P)) dt`,
/// `dP = α(P) dt + sqrt(2ν) dW`, with `P` reflected at the price bounds and
/// `K` clamped at 0. The same seed always gives the same path.
#[allow(clippy::too_many_arguments)]
pub fn simulate_sde<T: Real>(
    params: &ModelParams<T>,
    pp: &PriceProcess<T>,
    u: &ValueFunction2D<T>,
    k0: T,
    p0: T,
    horizon: T,
    dt: T,
    seed: u64,
) -> Result<Trajectory<T>> {
    if !(dt > T::zero()) {
        return Err(invalid("dt", "must be > 0"));
    }
    if !(horizon >= T::zero()) {
        return Err(invalid("horizon", "must be >= 0"));
    }
    let k_max = u.grid_k.k_max();
    if !(k0 >= T::zero() && k0 <= k_max) {
        return Err(Error::LeftDomain {
            t: 0.0,
            value: k0.as_f64(),
            lo: 0.0,
            hi: k_max.as_f64(),
        });
    }
    if !(p0 >= pp.p_min && p0 <= pp.p_max) {
        return Err(invalid("p0", "must lie in [p_min, p_max]"));
    }
    let steps = (horizon / dt).ceil().to_usize().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two = T::lit(2.0);
    let mut path = Trajectory::new(vec!["K", "p"]);
    path.times.reserve(steps + 1);
    path.states.reserve(steps + 1);
    let (mut k, mut p, mut t) = (k0, p0, T::zero());
    path.push(t, vec![k, p]);
    for s in 0..steps {
        let t_next = if s + 1 == steps {
            horizon
        } else {
            dt * T::of_usize(s + 1)
        };
        let step = t_next - t;
        let z: f64 = StandardNormal.sample(&mut rng);
        let dk = -params.delta * k + params.lam * u.eval(k, p);
        let dp = pp.drift.eval(p) * step + (two * pp.nu * step).sqrt() * T::lit(z);
        k = (k + step * dk).max(T::zero());
        p = pp.reflect(p + dp);
        t = t_next;
        if k > k_max {
            return Err(Error::LeftDomain {
                t: t.as_f64(),
                value: k.as_f64(),
                lo: 0.0,
                hi: k_max.as_f64(),
            });
        }
        path.push(t, vec![k, p]);
    }
    Ok(path)
}

/// Independent paths, one per seed, evaluated in parallel and returned in
/// seed order.
#[allow(clippy::too_many_arguments)]
pub fn simulate_ensemble<T: Real>(
    params: &ModelParams<T>,
    pp: &PriceProcess<T>,
    u: &ValueFunction2D<T>,
    k0: T,
    p0: T,
    horizon: T,
    dt: T,
    seeds: &[u64],
) -> Result<Vec<Trajectory<T>>> {
    seeds
        .par_iter()
        .map(|&s| simulate_sde(params, pp, u, k0, p0, horizon, dt, s))
        .collect()
}

/// Steps of a path that violate the drift-sign law: farther than `tol`
/// from the target curve, yet moving away from it. Returns their indices.
pub fn drift_sign_violations<T: Real>(
    path: &Trajectory<T>,
    curve: &TargetCurve<T>,
    tol: T,
) -> Vec<usize> {
    path.states
        .windows(2)
        .enumerate()
        .filter_map(|(s, w)| {
            let (k, p) = (w[0][0], w[0][1]);
            let gap = curve.eval(p) - k;
            let dk = w[1][0] - k;
            let bad = (gap > tol && dk < T::zero()) || (gap < -tol && dk > T::zero());
            bad.then_some(s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::det1d::{simulate_trajectory, solve_master_1d};

    fn baseline() -> ModelParams<f64> {
        ModelParams::baseline()
    }

    fn ou(reward: RewardMap<f64>) -> PriceProcess<f64> {
        PriceProcess {
            drift: PriceDrift::Affine { a: 0.0, b: -0.5 },
            nu: 0.05,
            reward,
            p_min: -1.5,
            p_max: 1.5,
        }
    }

    fn grids(pp: &PriceProcess<f64>, nk: usize, np: usize) -> (Grid1D<f64>, Grid1D<f64>) {
        let p = baseline();
        (
            Grid1D::new(default_k_max_2d(&p, pp), nk).unwrap(),
            Grid1D::on_interval(pp.p_min, pp.p_max, np).unwrap(),
        )
    }

    #[test]
    fn reflection_folds_into_bounds() {
        let pp = ou(RewardMap::Identity);
        assert_eq!(pp.reflect(0.3), 0.3);
        assert!((pp.reflect(1.7) - 1.3).abs() < 1e-12);
        assert!((pp.reflect(-1.6) + 1.4).abs() < 1e-12);
        assert!((pp.reflect(7.9) - pp.reflect(7.9)).abs() == 0.0);
        let far = pp.reflect(100.3);
        assert!((-1.5..=1.5).contains(&far));
    }

    #[test]
    fn capped_reward_respects_bounds() {
        let p = ModelParams {
            eps: 0.5,
            ..baseline()
        };
        let pp = ou(RewardMap::ExpCapped { cap: 5.0 });
        for i in 0..=100 {
            let x = -20.0 + 0.4 * i as f64;
            let g = pp.g(x, &p);
            assert!(g >= p.eps * p.c && g <= 5.0);
        }
    }

    #[test]
    fn identity_reward_reduces_to_1d() {
        let p = baseline();
        let pp = ou(RewardMap::Identity);
        let (gk, gp) = grids(&pp, 801, 11);
        let o = SolverOptions::default();
        let (u2, _) = solve_master_2d(&p, &pp, &gk, &gp, &o).unwrap();
        let u1 = solve_master_1d(&p, &gk, &o).unwrap();
        for j in 0..gp.len() {
            let s = u2.slice(j);
            let gap = crate::scalar::sup_distance(&s.values, &u1.values);
            assert!(gap <= 1e-4, "slice {j}: {gap}");
        }
    }

    #[test]
    fn capped_exponential_solution_properties() {
        let p = baseline();
        let pp = ou(RewardMap::ExpCapped { cap: 5.0 });
        let (gk, gp) = grids(&pp, 801, 21);
        let (u, stats) = solve_master_2d(&p, &pp, &gk, &gp, &SolverOptions::default()).unwrap();
        assert!(stats.residual <= 1e-8);
        assert!(master_residual_2d(&p, &pp, &u) <= 1e-8);
        assert!(u.slices_non_increasing(0.0));
        for j in 0..gp.len() {
            assert!(u.at(0, j) >= 0.0);
        }
        // g nondecreasing in p => U nondecreasing in p
        for i in 0..gk.len() {
            for j in 1..gp.len() {
                assert!(u.at(i, j) >= u.at(i, j - 1) - 1e-10);
            }
        }
        let curve = target_curve(&u, &p).unwrap();
        assert!(curve.k_star.windows(2).all(|w| w[1] >= w[0]));
        assert!(curve.k_star.iter().all(|&k| k > 0.0));
        for (j, &k) in curve.k_star.iter().enumerate() {
            let w = p.lam * u.slice(j).eval(k) - p.delta * k;
            assert!(w.abs() <= 1e-8);
        }
        assert!(curve.is_continuous(&u, &p, 1e-9));
    }

    #[test]
    fn seeded_paths_are_reproducible_and_obey_sign_law() {
        let p = baseline();
        let pp = ou(RewardMap::ExpCapped { cap: 5.0 });
        let (gk, gp) = grids(&pp, 801, 21);
        let (u, _) = solve_master_2d(&p, &pp, &gk, &gp, &SolverOptions::default()).unwrap();
        let curve = target_curve(&u, &p).unwrap();
        let a = simulate_sde(&p, &pp, &u, 1.0, 0.0, 10.0, 1e-3, 7).unwrap();
        let b = simulate_sde(&p, &pp, &u, 1.0, 0.0, 10.0, 1e-3, 7).unwrap();
        let c = simulate_sde(&p, &pp, &u, 1.0, 0.0, 10.0, 1e-3, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 10_001);
        assert!(a
            .component(1)
            .iter()
            .all(|&x| (pp.p_min..=pp.p_max).contains(&x)));
        assert!(drift_sign_violations(&a, &curve, gk.spacing()).is_empty());
        let ens = simulate_ensemble(&p, &pp, &u, 1.0, 0.0, 1.0, 1e-3, &[7, 8]).unwrap();
        assert_eq!(ens[0].states[..1001], a.states[..1001]);
    }

    #[test]
    fn vanishing_noise_recovers_deterministic_path() {
        let p = baseline();
        let pp = PriceProcess {
            nu: 1e-12,
            ..ou(RewardMap::Identity)
        };
        let (gk, gp) = grids(&pp, 4001, 5);
        let o = SolverOptions::default();
        let (u2, _) = solve_master_2d(&p, &pp, &gk, &gp, &o).unwrap();
        let u1 = solve_master_1d(&p, &gk, &o).unwrap();
        let sde = simulate_sde(&p, &pp, &u2, 0.0, 0.0, 250.0, 0.01, 1).unwrap();
        let det = simulate_trajectory(&p, &u1, 0.0, 250.0, 0.01).unwrap();
        assert!((sde.terminal()[0] - det.terminal()[0]).abs() < 1e-3);
        let k_star = crate::det1d::stationary_state_closed_form(&p);
        assert!((sde.terminal()[0] - k_star).abs() < 1e-3);
    }

    #[test]
    fn rejects_short_domain() {
        let p = baseline();
        let pp = ou(RewardMap::ExpCapped { cap: 5.0 });
        let gk = Grid1D::new(200.0, 101).unwrap();
        let gp = Grid1D::on_interval(pp.p_min, pp.p_max, 5).unwrap();
        assert!(matches!(
            solve_master_2d(&p, &pp, &gk, &gp, &SolverOptions::default()),
            Err(Error::InvalidGrid(_))
        ));
    }
}
