//! Two populations of miners with different electricity costs.
//!
//! `K` and `L` are the installed real hashrates of the two populations;
//! only the active parts `φ(K, L) ≤ K` and `ψ(K, L) ≤ L` mine. The values
//! `U` (population 1) and `V` (population 2) solve the coupled system
//!
//! ```text
//! 0 = -(r₁+δ)U + (-δK + λ₁U) ∂_K U + (-δL + λ₂V) ∂_L U + max(1/(φ+ψ+ε) - c₁, 0)
//! 0 = -(r₂+δ)V + (-δK + λ₁U) ∂_K V + (-δL + λ₂V) ∂_L V + max(1/(φ+ψ+ε) - c₂, 0)
//! ```
//!
//! on `[0, k_max]²`. Both transports are upwinded per node and the system
//! is relaxed by nonlinear Gauss–Seidel, sweeping the grid in the four
//! diagonal orderings so that information travels along the
//! characteristics in few passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::det1d::{forward_side, SolveStats, SolverOptions};
use crate::error::{invalid, Error, Result};
use crate::model::{unit_reward, Grid1D, ModelParams, Trajectory};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPopParams<T> {
    pub r1: T,
    pub r2: T,
    #[serde(rename = "lambda1")]
    pub lam1: T,
    #[serde(rename = "lambda2")]
    pub lam2: T,
    pub c1: T,
    pub c2: T,
    /// Shared progress rate.
    pub delta: T,
    pub eps: T,
}

impl<T: Real> TwoPopParams<T> {
    /// Both populations copy the one-population calibration, then
    /// population 2 gets cost `c2`.
    pub fn from_model(p: &ModelParams<T>, c2: T) -> Self {
        Self {
            r1: p.r,
            r2: p.r,
            lam1: p.lam,
            lam2: p.lam,
            c1: p.c,
            c2,
            delta: p.delta,
            eps: p.eps,
        }
    }

    pub fn validate(self) -> Result<Self> {
        for (field, v) in [
            ("r1", self.r1),
            ("r2", self.r2),
            ("lambda1", self.lam1),
            ("lambda2", self.lam2),
            ("c1", self.c1),
            ("c2", self.c2),
            ("delta", self.delta),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.eps >= T::zero()) || !self.eps.is_finite() {
            return Err(invalid("eps", "must be finite and >= 0"));
        }
        if !(self.c1.max(self.c2) * self.eps < T::one()) {
            return Err(invalid("eps", "max(c1, c2)*eps must be < 1"));
        }
        Ok(self)
    }

    /// Default truncation `1.25 / min(c1, c2)`.
    pub fn default_k_max(&self) -> T {
        T::lit(1.25) / self.c1.min(self.c2)
    }

    /// Population-1 parameters in isolation.
    pub fn first(&self) -> ModelParams<T> {
        ModelParams {
            r: self.r1,
            delta: self.delta,
            lam: self.lam1,
            c: self.c1,
            eps: self.eps,
        }
    }
}

/// Active hashrates `(φ, ψ)` of the two populations.
///
/// Starting from full participation, the higher-cost population shrinks
/// first until its members are indifferent (`1/(φ+ψ+ε) = c`), possibly to
/// zero; the lower-cost population is then checked the same way. With
/// equal costs both shrink in proportion to their stocks.
pub fn participation<T: Real>(k: T, l: T, tp: &TwoPopParams<T>) -> (T, T) {
    let eps = tp.eps;
    let covers = |c: T, total: T| (total + eps).recip() >= c;
    let active = |c: T, other: T, stock: T| (c.recip() - other - eps).max(T::zero()).min(stock);
    if tp.c1 == tp.c2 {
        let total = k + l;
        if covers(tp.c1, total) {
            return (k, l);
        }
        let cap = (tp.c1.recip() - eps).max(T::zero());
        return (k * cap / total, l * cap / total);
    }
    let (mut phi, mut psi) = (k, l);
    if tp.c1 > tp.c2 {
        if !covers(tp.c1, phi + psi) {
            phi = active(tp.c1, psi, k);
        }
        if !covers(tp.c2, phi + psi) {
            psi = active(tp.c2, phi, l);
        }
    } else {
        if !covers(tp.c2, phi + psi) {
            psi = active(tp.c2, phi, l);
        }
        if !covers(tp.c1, phi + psi) {
            phi = active(tp.c1, psi, k);
        }
    }
    (phi, psi)
}

/// Values of both populations on the square grid `grid × grid`;
/// index `j * n + i` holds the node `(K_i, L_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunctionPair<T> {
    pub grid: Grid1D<T>,
    pub u: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> ValueFunctionPair<T> {
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.grid.len() + i
    }

    /// Bilinear interpolation of `(U, V)` at `(k, l)`, clamped to the grid.
    pub fn eval(&self, k: T, l: T) -> (T, T) {
        bilinear(&self.grid, &self.u, &self.v, k, l)
    }

    /// Both values non-increasing in both coordinates, up to `slack`.
    pub fn is_monotone(&self, slack: T) -> bool {
        let n = self.grid.len();
        (0..n).all(|j| {
            (0..n).all(|i| {
                let a = self.idx(i, j);
                let ok_k = i + 1 == n
                    || (self.u[a + 1] <= self.u[a] + slack && self.v[a + 1] <= self.v[a] + slack);
                let ok_l = j + 1 == n
                    || (self.u[a + n] <= self.u[a] + slack && self.v[a + n] <= self.v[a] + slack);
                ok_k && ok_l
            })
        })
    }

    /// Largest value of `(U(z₁)-U(z₂))(x₁-x₂) + (V(z₁)-V(z₂))(y₁-y₂)` over
    /// `samples` random node pairs drawn with `seed`. The coupled
    /// monotonicity property asks for this to be `<= 0`.
    pub fn max_coupling(&self, samples: usize, seed: u64) -> T {
        let n = self.grid.len();
        let nodes = self.grid.nodes();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = T::neg_infinity();
        for _ in 0..samples {
            let (i1, j1) = (rng.random_range(0..n), rng.random_range(0..n));
            let (i2, j2) = (rng.random_range(0..n), rng.random_range(0..n));
            let (a, b) = (self.idx(i1, j1), self.idx(i2, j2));
            let w = (self.u[a] - self.u[b]) * (nodes[i1] - nodes[i2])
                + (self.v[a] - self.v[b]) * (nodes[j1] - nodes[j2]);
            worst = worst.max(w);
        }
        worst
    }
}

pub(crate) fn bilinear<T: Real>(g: &Grid1D<T>, u: &[T], v: &[T], k: T, l: T) -> (T, T) {
    let n = g.len();
    let (i, wk) = g.locate(k);
    let (j, wl) = g.locate(l);
    let one = T::one();
    let w = [
        (j * n + i, (one - wk) * (one - wl)),
        (j * n + i + 1, wk * (one - wl)),
        ((j + 1) * n + i, (one - wk) * wl),
        ((j + 1) * n + i + 1, wk * wl),
    ];
    w.iter().fold((T::zero(), T::zero()), |(a, b), &(ix, c)| {
        (a + c * u[ix], b + c * v[ix])
    })
}

/// Coefficients of one population's equation over a square grid, shared
/// by the deterministic and the price-driven solvers.
pub(crate) struct PairCoeffs<T> {
    pub rho1: T,
    pub rho2: T,
    pub lam1: T,
    /// `λ₂`, possibly price dependent in the caller.
    pub lam2: T,
    pub delta: T,
}

/// Relaxes the node `a = (i, j)` in place: drifts are frozen at the
/// current iterate, the linear upwind equations are solved for `(U, V)`,
/// and the process is repeated once more.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn relax_node<T: Real>(
    u: &mut [T],
    v: &mut [T],
    i: usize,
    j: usize,
    n: usize,
    k: &[T],
    h: T,
    c: &PairCoeffs<T>,
    f1: T,
    f2: T,
    coupling: (T, T, T, T),
) {
    let a = j * n + i;
    let (cw1, cs1, cw2, cs2) = coupling;
    for _ in 0..2 {
        let bk = c.lam1 * u[a] - c.delta * k[i];
        let bl = c.lam2 * v[a] - c.delta * k[j];
        let nk = if forward_side(i, n, bk) { a + 1 } else { a - 1 };
        let nl = if forward_side(j, n, bl) { a + n } else { a - n };
        let (wk, wl) = (bk.abs() / h, bl.abs() / h);
        u[a] = (f1 + cs1 + wk * u[nk] + wl * u[nl]) / (c.rho1 + cw1 + wk + wl);
        v[a] = (f2 + cs2 + wk * v[nk] + wl * v[nl]) / (c.rho2 + cw2 + wk + wl);
    }
}

/// Residuals of both equations at node `(i, j)`; `extra` adds the price
/// coupling `(-w₁U + s₁, -w₂V + s₂)` of the stochastic model.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn node_residual<T: Real>(
    u: &[T],
    v: &[T],
    i: usize,
    j: usize,
    n: usize,
    k: &[T],
    h: T,
    c: &PairCoeffs<T>,
    f1: T,
    f2: T,
    coupling: (T, T, T, T),
) -> (T, T) {
    let a = j * n + i;
    let (cw1, cs1, cw2, cs2) = coupling;
    let bk = c.lam1 * u[a] - c.delta * k[i];
    let bl = c.lam2 * v[a] - c.delta * k[j];
    let (duk, dvk) = if forward_side(i, n, bk) {
        ((u[a + 1] - u[a]) / h, (v[a + 1] - v[a]) / h)
    } else {
        ((u[a] - u[a - 1]) / h, (v[a] - v[a - 1]) / h)
    };
    let (dul, dvl) = if forward_side(j, n, bl) {
        ((u[a + n] - u[a]) / h, (v[a + n] - v[a]) / h)
    } else {
        ((u[a] - u[a - n]) / h, (v[a] - v[a - n]) / h)
    };
    (
        -(c.rho1 + cw1) * u[a] + bk * duk + bl * dul + f1 + cs1,
        -(c.rho2 + cw2) * v[a] + bk * dvk + bl * dvl + f2 + cs2,
    )
}

/// Flow payoffs `max(g/(φ+ψ+ε) - c, 0)` at every node; `g2` scales the
/// reward of population 2 and its participation threshold.
pub(crate) fn pair_payoffs<T: Real>(
    tp: &TwoPopParams<T>,
    grid: &Grid1D<T>,
    g2: T,
) -> (Vec<T>, Vec<T>) {
    let n = grid.len();
    let h = grid.spacing();
    let k = grid.nodes();
    // population 2 compares g2·reward with c2, i.e. reward with c2/g2
    let eff = TwoPopParams {
        c2: tp.c2 / g2,
        ..*tp
    };
    let mut f1 = Vec::with_capacity(n * n);
    let mut f2 = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let (phi, psi) = participation(k[i], k[j], &eff);
            let reward = unit_reward(phi + psi, tp.eps, h);
            f1.push((reward - tp.c1).max(T::zero()));
            f2.push((g2 * reward - tp.c2).max(T::zero()));
        }
    }
    (f1, f2)
}

/// Four Gauss–Seidel sweeps over the grid, one per diagonal ordering.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sweep_pair<T: Real>(
    u: &mut [T],
    v: &mut [T],
    n: usize,
    k: &[T],
    h: T,
    c: &PairCoeffs<T>,
    f1: &[T],
    f2: &[T],
    coupling: impl Fn(usize) -> (T, T, T, T),
) {
    for dir in 0..4 {
        for jj in 0..n {
            let j = if dir & 2 == 0 { jj } else { n - 1 - jj };
            for ii in 0..n {
                let i = if dir & 1 == 0 { ii } else { n - 1 - ii };
                let a = j * n + i;
                relax_node(u, v, i, j, n, k, h, c, f1[a], f2[a], coupling(a));
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn pair_residual<T: Real>(
    u: &[T],
    v: &[T],
    n: usize,
    k: &[T],
    h: T,
    c: &PairCoeffs<T>,
    f1: &[T],
    f2: &[T],
    coupling: impl Fn(usize) -> (T, T, T, T),
) -> T {
    let mut res = T::zero();
    for j in 0..n {
        for i in 0..n {
            let a = j * n + i;
            let (r1, r2) = node_residual(u, v, i, j, n, k, h, c, f1[a], f2[a], coupling(a));
            res = res.max(r1.abs()).max(r2.abs());
        }
    }
    res
}

pub(crate) fn check_outward<T: Real>(
    u: &[T],
    v: &[T],
    n: usize,
    k: &[T],
    c: &PairCoeffs<T>,
) -> Result<()> {
    let k_max = k[n - 1];
    for m in 0..n {
        let east = m * n + n - 1;
        let north = (n - 1) * n + m;
        if c.lam1 * u[east] - c.delta * k_max > T::zero() {
            return Err(Error::OutwardDrift {
                node: east,
                k: k_max.as_f64(),
            });
        }
        if c.lam2 * v[north] - c.delta * k_max > T::zero() {
            return Err(Error::OutwardDrift {
                node: north,
                k: k_max.as_f64(),
            });
        }
    }
    Ok(())
}

/// Solves the two-population system on `grid × grid`.
pub fn solve_system<T: Real>(
    tp: &TwoPopParams<T>,
    grid: &Grid1D<T>,
    o: &SolverOptions<T>,
) -> Result<(ValueFunctionPair<T>, SolveStats<T>)> {
    let tp = tp.validate()?;
    let o = o.validate()?;
    let bound = tp.c1.min(tp.c2).recip();
    if !(grid.k_max() > bound) {
        return Err(Error::InvalidGrid(format!(
            "k_max = {} must exceed 1/min(c1, c2) = {bound}",
            grid.k_max()
        )));
    }
    let n = grid.len();
    let h = grid.spacing();
    let k = grid.nodes();
    let (f1, f2) = pair_payoffs(&tp, grid, T::one());
    let c = PairCoeffs {
        rho1: tp.r1 + tp.delta,
        rho2: tp.r2 + tp.delta,
        lam1: tp.lam1,
        lam2: tp.lam2,
        delta: tp.delta,
    };
    let none = |_| (T::zero(), T::zero(), T::zero(), T::zero());
    let mut u: Vec<T> = f1.iter().map(|&f| f / c.rho1).collect();
    let mut v: Vec<T> = f2.iter().map(|&f| f / c.rho2).collect();
    let mut res = pair_residual(&u, &v, n, k, h, &c, &f1, &f2, none);
    let mut sweeps = 0;
    while res > o.tol && sweeps < o.max_iters {
        sweeps += 1;
        sweep_pair(&mut u, &mut v, n, k, h, &c, &f1, &f2, none);
        res = pair_residual(&u, &v, n, k, h, &c, &f1, &f2, none);
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
    check_outward(&u, &v, n, k, &c)?;
    Ok((
        ValueFunctionPair {
            grid: grid.clone(),
            u,
            v,
        },
        SolveStats {
            residual: res,
            iterations: sweeps,
        },
    ))
}

/// Zero of `W(z) = (-δx + λ₁U(z), -δy + λ₂V(z))` on the interpolated
/// solution, by damped projected iteration `z ← Π(z + τW(z))`.
///
/// The step `τ` doubles after every step that lowers `|W|` and halves
/// otherwise. A root on `{K = 0}` or `{L = 0}` is approached through the
/// projection, so the returned point lies on the boundary exactly.
pub fn stationary_state_2pop<T: Real>(
    tp: &TwoPopParams<T>,
    uv: &ValueFunctionPair<T>,
) -> Result<(T, T)> {
    stationary_pair(uv, tp.delta, tp.lam1, tp.lam2, None)
}

pub(crate) fn stationary_pair<T: Real>(
    uv: &ValueFunctionPair<T>,
    delta: T,
    lam1: T,
    lam2: T,
    start: Option<(T, T)>,
) -> Result<(T, T)> {
    let k_max = uv.grid.k_max();
    let clamp = |x: T| x.max(T::zero()).min(k_max);
    let field = |x: T, y: T| {
        let (a, b) = uv.eval(x, y);
        (lam1 * a - delta * x, lam2 * b - delta * y)
    };
    // norm of the projected step, zero exactly at a (boundary) root
    let gap = |x: T, y: T, w: (T, T)| {
        let dx = clamp(x + w.0) - x;
        let dy = clamp(y + w.1) - y;
        dx.hypot(dy)
    };
    let (mut x, mut y) = start.unwrap_or((T::one(), T::one()));
    let mut w = field(x, y);
    let mut g = gap(x, y, w);
    let mut tau = T::one();
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    let mut iters = 0;
    while g > tol * (T::one() + x.abs() + y.abs()) {
        iters += 1;
        if iters > 100_000 {
            return Err(Error::NoContraction {
                iterations: iters,
                residual: g.as_f64(),
            });
        }
        let (nx, ny) = (clamp(x + tau * w.0), clamp(y + tau * w.1));
        let nw = field(nx, ny);
        let ng = gap(nx, ny, nw);
        if ng < g {
            (x, y, w, g) = (nx, ny, nw, ng);
            tau = (tau * T::lit(2.0)).min(T::lit(1e6));
        } else {
            tau *= T::lit(0.5);
            if tau < T::lit(1e-14) {
                // no further decrease possible at this resolution
                break;
            }
        }
    }
    // Close to an axis whose field does not point inward, the iteration
    // only decays geometrically towards it; put the root on the axis.
    let snap = T::lit(1e-8);
    if x < snap && field(T::zero(), y).0 <= tol {
        x = T::zero();
    }
    if y < snap && field(x, T::zero()).1 <= tol {
        y = T::zero();
    }
    Ok((x, y))
}

/// Explicit Euler path of `dK = (-δK + λ₁U) dt`, `dL = (-δL + λ₂V) dt`
/// with bilinear interpolation; both coordinates clamped at 0.
pub fn simulate_2pop<T: Real>(
    tp: &TwoPopParams<T>,
    uv: &ValueFunctionPair<T>,
    k0: T,
    l0: T,
    horizon: T,
    dt: T,
) -> Result<Trajectory<T>> {
    if !(dt > T::zero()) {
        return Err(invalid("dt", "must be > 0"));
    }
    if !(horizon >= T::zero()) {
        return Err(invalid("horizon", "must be >= 0"));
    }
    let k_max = uv.grid.k_max();
    for z in [k0, l0] {
        if !(z >= T::zero() && z <= k_max) {
            return Err(Error::LeftDomain {
                t: 0.0,
                value: z.as_f64(),
                lo: 0.0,
                hi: k_max.as_f64(),
            });
        }
    }
    let steps = (horizon / dt).ceil().to_usize().unwrap_or(0);
    let mut path = Trajectory::new(vec!["K", "L"]);
    let (mut k, mut l, mut t) = (k0, l0, T::zero());
    path.push(t, vec![k, l]);
    for s in 0..steps {
        let t_next = if s + 1 == steps {
            horizon
        } else {
            dt * T::of_usize(s + 1)
        };
        let step = t_next - t;
        let (a, b) = uv.eval(k, l);
        k = (k + step * (tp.lam1 * a - tp.delta * k)).max(T::zero());
        l = (l + step * (tp.lam2 * b - tp.delta * l)).max(T::zero());
        t = t_next;
        if k > k_max || l > k_max {
            return Err(Error::LeftDomain {
                t: t.as_f64(),
                value: k.max(l).as_f64(),
                lo: 0.0,
                hi: k_max.as_f64(),
            });
        }
        path.push(t, vec![k, l]);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::det1d::stationary_state_closed_form;
    use proptest::prelude::*;

    fn asym() -> TwoPopParams<f64> {
        TwoPopParams::from_model(&ModelParams::baseline(), 0.3)
    }

    fn sym() -> TwoPopParams<f64> {
        TwoPopParams::from_model(&ModelParams::baseline(), 0.02)
    }

    #[test]
    fn participation_examples() {
        let tp = asym();
        assert_eq!(participation(1.0, 1.0, &tp), (1.0, 1.0));
        let (phi, psi) = participation(4.2766, 1.0, &tp);
        assert_eq!(phi, 4.2766);
        assert_eq!(psi, 0.0);
        assert_eq!(participation(0.0, 0.0, &tp), (0.0, 0.0));
        // mixed: K = 2, L = 5 -> psi = 1/0.3 - 2
        let (phi, psi) = participation(2.0, 5.0, &tp);
        assert_eq!(phi, 2.0);
        assert!((psi - (1.0 / 0.3 - 2.0)).abs() < 1e-14);
        // cheap population alone above its breakeven
        let (phi, psi) = participation(80.0, 3.0, &tp);
        assert!((phi - 50.0).abs() < 1e-12);
        assert_eq!(psi, 0.0);
        // equal costs shrink proportionally
        let (phi, psi) = participation(60.0, 40.0, &sym());
        assert!((phi - 30.0).abs() < 1e-12 && (psi - 20.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn participation_invariants(k in 0.0..100.0f64, l in 0.0..100.0f64,
                                    c1 in 0.01..0.5f64, c2 in 0.01..0.5f64, eps in 0.0..1.0f64) {
            let tp = TwoPopParams { c1, c2, eps, ..asym() };
            let (phi, psi) = participation(k, l, &tp);
            prop_assert!(phi >= 0.0 && phi <= k);
            prop_assert!(psi >= 0.0 && psi <= l);
            let reward = 1.0 / (phi + psi + eps);
            // an active population covers its cost; a partially active
            // one is exactly indifferent
            if phi > 0.0 { prop_assert!(reward >= c1 * (1.0 - 1e-12)); }
            if psi > 0.0 { prop_assert!(reward >= c2 * (1.0 - 1e-12)); }
            if psi > 0.0 && psi < l { prop_assert!((reward - c2).abs() <= 1e-9 * c2.max(reward)); }
            if phi > 0.0 && phi < k { prop_assert!((reward - c1).abs() <= 1e-9 * c1.max(reward)); }
            // an idle population could not cover its cost
            if phi < k && c1 != c2 { prop_assert!(reward <= c1 * (1.0 + 1e-12)); }
            if psi < l && c1 != c2 { prop_assert!(reward <= c2 * (1.0 + 1e-12)); }
        }
    }

    fn solve(tp: &TwoPopParams<f64>, n: usize) -> ValueFunctionPair<f64> {
        let g = Grid1D::new(tp.default_k_max(), n).unwrap();
        solve_system(tp, &g, &SolverOptions::default()).unwrap().0
    }

    #[test]
    fn asymmetric_boundary_equilibrium() {
        let tp = asym();
        let uv = solve(&tp, 501);
        assert!(uv.is_monotone(1e-12));
        assert!(uv.max_coupling(10_000, 1) <= 1e-12);
        assert!(uv.u.iter().chain(&uv.v).all(|&x| x >= 0.0));
        let (x, y) = stationary_state_2pop(&tp, &uv).unwrap();
        let k_star = stationary_state_closed_form(&tp.first());
        assert_eq!(y, 0.0);
        assert!((x - k_star).abs() < 1e-3, "x = {x}");
        // V <= U on the diagonal
        for i in 0..uv.grid.len() {
            let a = uv.idx(i, i);
            assert!(uv.v[a] <= uv.u[a] + 1e-12);
        }
        let path = simulate_2pop(&tp, &uv, 1.0, 1.0, 250.0, 0.01).unwrap();
        let end = path.terminal();
        assert!((end[0] - x).abs() < 1e-3 && end[1] < 1e-3);
    }

    #[test]
    fn symmetric_case_is_symmetric() {
        let tp = sym();
        let uv = solve(&tp, 501);
        let n = uv.grid.len();
        for j in 0..n {
            for i in 0..n {
                assert!((uv.u[uv.idx(i, j)] - uv.v[uv.idx(j, i)]).abs() < 1e-9);
            }
        }
        let (x, y) = stationary_state_2pop(&tp, &uv).unwrap();
        assert!((x - y).abs() < 1e-8);
        let two = ModelParams {
            lam: 2.0,
            ..tp.first()
        };
        let s = stationary_state_closed_form(&two);
        assert!((x - s / 2.0).abs() < 1e-3, "x = {x}");
        let path = simulate_2pop(&tp, &uv, 1.0, 1.0, 50.0, 0.01).unwrap();
        assert!(path.states.iter().all(|z| (z[0] - z[1]).abs() < 1e-9));
    }
}
