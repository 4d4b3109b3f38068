//! Two populations in two currencies with a random exchange rate.
//!
//! Population 2 pays its electricity in its own currency; the reward it
//! receives is scaled by the exchange rate `h(p)` and its hardware
//! friction becomes `λ₂(h(p))`. The unknowns `U(K, L, p)`, `V(K, L, p)`
//! solve the two-population system with the price terms `α ∂_p + ν ∂_pp`
//! added to both equations.
//!
//! Each outer iteration relaxes every price slice with the
//! two-population sweeps (slices in parallel, neighbouring slices read
//! from the previous iterate, so the result does not depend on
//! scheduling), then solves the price lines exactly with the hashrate
//! drifts frozen. Intended for coarse grids: at most `64³` nodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::det1d::{forward_side, SolveStats, SolverOptions};
use crate::error::{invalid, Error, Result};
use crate::linalg::Tridiag;
use crate::model::Grid1D;
use crate::noise::PriceProcess;
use crate::scalar::Real;
use crate::twopop::{
    check_outward, pair_payoffs, pair_residual, stationary_pair, sweep_pair, PairCoeffs,
    TwoPopParams, ValueFunctionPair,
};

/// Largest grid the stochastic two-population solver accepts.
pub const MAX_NODES: usize = 64 * 64 * 64;

/// Exchange rate `h(p)` between the two national currencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExchangeRate<T> {
    Constant {
        value: T,
    },
    /// `min(max(e^p, floor), cap)`.
    ExpCapped {
        floor: T,
        cap: T,
    },
}

impl<T: Real> ExchangeRate<T> {
    pub fn eval(&self, p: T) -> T {
        match *self {
            ExchangeRate::Constant { value } => value,
            ExchangeRate::ExpCapped { floor, cap } => p.exp().max(floor).min(cap),
        }
    }

    pub fn validate(self) -> Result<Self> {
        let ok = match self {
            ExchangeRate::Constant { value } => value > T::zero() && value.is_finite(),
            ExchangeRate::ExpCapped { floor, cap } => {
                floor > T::zero() && cap >= floor && cap.is_finite()
            }
        };
        if ok {
            Ok(self)
        } else {
            Err(invalid(
                "exchange_rate",
                "must be positive and finite, with floor <= cap",
            ))
        }
    }
}

/// How the friction of population 2 follows the exchange rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda2Form {
    /// `λ₂(h) = λ̄₂ h`.
    #[default]
    Multiply,
    /// `λ₂(h) = λ̄₂ / h`.
    Divide,
    /// `λ₂(h) = λ̄₂`.
    Constant,
}

impl Lambda2Form {
    pub fn apply<T: Real>(self, base: T, h: T) -> T {
        match self {
            Lambda2Form::Multiply => base * h,
            Lambda2Form::Divide => base / h,
            Lambda2Form::Constant => base,
        }
    }
}

/// Solution on `grid × grid × grid_p`; index `(m n + j) n + i` holds
/// `(K_i, L_j, p_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPopNoiseSolution<T> {
    pub grid: Grid1D<T>,
    pub grid_p: Grid1D<T>,
    pub u: Vec<T>,
    pub v: Vec<T>,
    /// `h(p_m)` per slice.
    pub rate: Vec<T>,
    /// `λ₂(h(p_m))` per slice.
    pub lam2: Vec<T>,
}

impl<T: Real> TwoPopNoiseSolution<T> {
    /// The pair `(U, V)(·, ·, p_m)`.
    pub fn slice(&self, m: usize) -> ValueFunctionPair<T> {
        let nn = self.grid.len() * self.grid.len();
        ValueFunctionPair {
            grid: self.grid.clone(),
            u: self.u[m * nn..(m + 1) * nn].to_vec(),
            v: self.v[m * nn..(m + 1) * nn].to_vec(),
        }
    }
}

/// Per-price attractor `Z*(p) = (K*(p), L*(p))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSurface<T> {
    pub p: Vec<T>,
    pub k_star: Vec<T>,
    pub l_star: Vec<T>,
}

impl<T: Real> TargetSurface<T> {
    /// Checks `|Z*_{m+1} - Z*_m| <= |W_{m+1}(Z*_m)|/δ + slack`, the bound
    /// implied by the strong monotonicity of the flow field `W`.
    pub fn is_continuous(
        &self,
        sol: &TwoPopNoiseSolution<T>,
        tp: &TwoPopParams<T>,
        slack: T,
    ) -> bool {
        (0..self.p.len().saturating_sub(1)).all(|m| {
            let next = sol.slice(m + 1);
            let (x, y) = (self.k_star[m], self.l_star[m]);
            let (a, b) = next.eval(x, y);
            let w = (tp.lam1 * a - tp.delta * x).hypot(sol.lam2[m + 1] * b - tp.delta * y);
            let jump = (self.k_star[m + 1] - x).hypot(self.l_star[m + 1] - y);
            jump <= w / tp.delta + slack
        })
    }
}

/// Default hashrate truncation: `1.25` times the largest breakeven
/// hashrate of either population over the price grid.
pub fn default_k_max_noise<T: Real>(
    tp: &TwoPopParams<T>,
    rate: &ExchangeRate<T>,
    grid_p: &Grid1D<T>,
) -> T {
    let h_max = grid_p
        .nodes()
        .iter()
        .map(|&p| rate.eval(p))
        .fold(T::zero(), T::max);
    T::lit(1.25) * tp.c1.recip().max(h_max / tp.c2)
}

/// Solves the stochastic two-population system and extracts `Z*(p)`.
///
/// Only the drift, diffusion and bounds of `pp` are used; the exchange
/// rate `rate` takes the place of its reward map.
pub fn solve_2pop_noise<T: Real>(
    tp: &TwoPopParams<T>,
    pp: &PriceProcess<T>,
    rate: &ExchangeRate<T>,
    form: Lambda2Form,
    grid: &Grid1D<T>,
    grid_p: &Grid1D<T>,
    o: &SolverOptions<T>,
) -> Result<(TwoPopNoiseSolution<T>, TargetSurface<T>, SolveStats<T>)> {
    let tp = tp.validate()?;
    let o = o.validate()?;
    let rate = rate.validate()?;
    let pp = pp.validate(&tp.first())?;
    if grid_p.lo() != pp.p_min || grid_p.k_max() != pp.p_max {
        return Err(Error::GridMismatch(
            "price grid must span [p_min, p_max]".into(),
        ));
    }
    let n = grid.len();
    let np = grid_p.len();
    let nn = n * n;
    if nn * np > MAX_NODES {
        return Err(Error::InvalidGrid(format!(
            "{} nodes exceed the supported {MAX_NODES}",
            nn * np
        )));
    }
    let h = grid.spacing();
    let k = grid.nodes();
    let rates: Vec<T> = grid_p.nodes().iter().map(|&p| rate.eval(p)).collect();
    let bound = rates.iter().fold(tp.c1.recip(), |m, &hm| m.max(hm / tp.c2));
    if !(grid.k_max() > bound) {
        return Err(Error::InvalidGrid(format!(
            "k_max = {} must exceed the largest breakeven hashrate {bound}",
            grid.k_max()
        )));
    }
    let lam2: Vec<T> = rates.iter().map(|&hm| form.apply(tp.lam2, hm)).collect();
    let coeffs: Vec<PairCoeffs<T>> = lam2
        .iter()
        .map(|&l2| PairCoeffs {
            rho1: tp.r1 + tp.delta,
            rho2: tp.r2 + tp.delta,
            lam1: tp.lam1,
            lam2: l2,
            delta: tp.delta,
        })
        .collect();
    let mut f1 = Vec::with_capacity(nn * np);
    let mut f2 = Vec::with_capacity(nn * np);
    for &hm in &rates {
        let (a, b) = pair_payoffs(&tp, grid, hm);
        f1.extend(a);
        f2.extend(b);
    }
    let weights = crate::noise::price_weights(&pp, grid_p);

    let mut u: Vec<T> = f1.iter().map(|&f| f / coeffs[0].rho1).collect();
    let mut v: Vec<T> = f2.iter().map(|&f| f / coeffs[0].rho2).collect();

    // price coupling of node `a` in slice `m`, read from `(su, sv)`
    let coupling = |su: &[T], sv: &[T], m: usize, a: usize| {
        let (wm, wp) = weights[m];
        let (mut s1, mut s2) = (T::zero(), T::zero());
        if m > 0 {
            s1 += wm * su[(m - 1) * nn + a];
            s2 += wm * sv[(m - 1) * nn + a];
        }
        if m + 1 < np {
            s1 += wp * su[(m + 1) * nn + a];
            s2 += wp * sv[(m + 1) * nn + a];
        }
        (wm + wp, s1, wm + wp, s2)
    };
    let residual = |u: &[T], v: &[T]| {
        (0..np)
            .map(|m| {
                let r = m * nn..(m + 1) * nn;
                pair_residual(
                    &u[r.clone()],
                    &v[r.clone()],
                    n,
                    k,
                    h,
                    &coeffs[m],
                    &f1[r.clone()],
                    &f2[r],
                    |a| coupling(u, v, m, a),
                )
            })
            .fold(T::zero(), T::max)
    };

    let mut res = residual(&u, &v);
    let mut sweeps = 0;
    let mut sys = Tridiag::zeros(np);
    let mut scratch = Vec::with_capacity(np);
    while res > o.tol && sweeps < o.max_iters {
        sweeps += 1;
        let (su, sv) = (u.clone(), v.clone());
        u.par_chunks_mut(nn)
            .zip(v.par_chunks_mut(nn))
            .enumerate()
            .for_each(|(m, (um, vm))| {
                let r = m * nn..(m + 1) * nn;
                sweep_pair(um, vm, n, k, h, &coeffs[m], &f1[r.clone()], &f2[r], |a| {
                    coupling(&su, &sv, m, a)
                });
            });
        for j in 0..n {
            for i in 0..n {
                price_line(
                    &mut u,
                    &mut v,
                    i,
                    j,
                    n,
                    k,
                    h,
                    &coeffs,
                    &weights,
                    &f1,
                    &f2,
                    &mut sys,
                    &mut scratch,
                );
            }
        }
        res = residual(&u, &v);
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
    for (m, c) in coeffs.iter().enumerate() {
        let r = m * nn..(m + 1) * nn;
        check_outward(&u[r.clone()], &v[r], n, k, c)?;
    }
    let sol = TwoPopNoiseSolution {
        grid: grid.clone(),
        grid_p: grid_p.clone(),
        u,
        v,
        rate: rates,
        lam2,
    };
    let mut k_star = Vec::with_capacity(np);
    let mut l_star = Vec::with_capacity(np);
    let mut start = None;
    for m in 0..np {
        let z = stationary_pair(&sol.slice(m), tp.delta, tp.lam1, sol.lam2[m], start)?;
        k_star.push(z.0);
        l_star.push(z.1);
        start = Some(z);
    }
    let surface = TargetSurface {
        p: grid_p.nodes().to_vec(),
        k_star,
        l_star,
    };
    Ok((
        sol,
        surface,
        SolveStats {
            residual: res,
            iterations: sweeps,
        },
    ))
}

/// Solves the price line through `(K_i, L_j)` for `U` and then `V`, with
/// the hashrate drifts and their upwind neighbours frozen.
#[allow(clippy::too_many_arguments)]
fn price_line<T: Real>(
    u: &mut [T],
    v: &mut [T],
    i: usize,
    j: usize,
    n: usize,
    k: &[T],
    h: T,
    coeffs: &[PairCoeffs<T>],
    weights: &[(T, T)],
    f1: &[T],
    f2: &[T],
    sys: &mut Tridiag<T>,
    scratch: &mut Vec<T>,
) {
    let nn = n * n;
    let np = coeffs.len();
    let a0 = j * n + i;
    let mut links = Vec::with_capacity(np);
    for (m, c) in coeffs.iter().enumerate() {
        let a = m * nn + a0;
        let bk = c.lam1 * u[a] - c.delta * k[i];
        let bl = c.lam2 * v[a] - c.delta * k[j];
        let nk = if forward_side(i, n, bk) { a + 1 } else { a - 1 };
        let nl = if forward_side(j, n, bl) { a + n } else { a - n };
        links.push((bk.abs() / h, nk, bl.abs() / h, nl));
    }
    for (vals, f, first) in [(&mut *u, f1, true), (&mut *v, f2, false)] {
        for (m, c) in coeffs.iter().enumerate() {
            let a = m * nn + a0;
            let (wk, nk, wl, nl) = links[m];
            let (wm, wp) = weights[m];
            let rho = if first { c.rho1 } else { c.rho2 };
            sys.diag[m] = rho + wm + wp + wk + wl;
            sys.sub[m] = -wm;
            sys.sup[m] = -wp;
            sys.rhs[m] = f[a] + wk * vals[nk] + wl * vals[nl];
        }
        let x = sys.solve_in_place(scratch);
        for (m, &x) in x.iter().enumerate() {
            vals[m * nn + a0] = x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::noise::{PriceDrift, RewardMap};
    use crate::twopop::{solve_system, stationary_state_2pop};

    fn tp() -> TwoPopParams<f64> {
        TwoPopParams::from_model(&ModelParams::baseline(), 0.03)
    }

    fn process(nu: f64, drift: PriceDrift<f64>) -> PriceProcess<f64> {
        PriceProcess {
            drift,
            nu,
            reward: RewardMap::Identity,
            p_min: -0.5,
            p_max: 0.5,
        }
    }

    fn opts() -> SolverOptions<f64> {
        SolverOptions {
            tol: 1e-6,
            ..Default::default()
        }
    }

    #[test]
    fn constant_rate_matches_deterministic_system() {
        let tp = tp();
        let pp = process(0.1, PriceDrift::Affine { a: 0.0, b: -1.0 });
        let grid = Grid1D::new(tp.default_k_max(), 41).unwrap();
        let gp = Grid1D::on_interval(pp.p_min, pp.p_max, 9).unwrap();
        let rate = ExchangeRate::Constant { value: 1.0 };
        let (sol, surf, stats) =
            solve_2pop_noise(&tp, &pp, &rate, Lambda2Form::Constant, &grid, &gp, &opts()).unwrap();
        assert!(stats.residual <= 1e-6);
        let (det, _) = solve_system(&tp, &grid, &SolverOptions::default()).unwrap();
        let z = stationary_state_2pop(&tp, &det).unwrap();
        for m in 0..gp.len() {
            let s = sol.slice(m);
            let gap = crate::scalar::sup_distance(&s.u, &det.u)
                .max(crate::scalar::sup_distance(&s.v, &det.v));
            assert!(gap <= 1e-4, "slice {m}: {gap}");
            assert!((surf.k_star[m] - z.0).abs() < 1e-6);
            assert!((surf.l_star[m] - z.1).abs() < 1e-6);
        }
    }

    #[test]
    fn frozen_price_reduces_to_rescaled_system() {
        let tp = tp();
        let pp = process(1e-12, PriceDrift::Constant { a: 0.0 });
        let rate = ExchangeRate::ExpCapped {
            floor: 0.1,
            cap: 10.0,
        };
        let gp = Grid1D::on_interval(pp.p_min, pp.p_max, 5).unwrap();
        let grid = Grid1D::new(default_k_max_noise(&tp, &rate, &gp), 41).unwrap();
        let form = Lambda2Form::Multiply;
        let (sol, _, _) = solve_2pop_noise(&tp, &pp, &rate, form, &grid, &gp, &opts()).unwrap();
        for m in [0, 2, 4] {
            let hm = sol.rate[m];
            // V = h Ṽ where Ṽ solves the system with cost c₂/h and
            // friction λ₂(h) h
            let det_tp = TwoPopParams {
                c2: tp.c2 / hm,
                lam2: form.apply(tp.lam2, hm) * hm,
                ..tp
            };
            let (det, _) = solve_system(&det_tp, &grid, &SolverOptions::default()).unwrap();
            let s = sol.slice(m);
            let scaled: Vec<f64> = det.v.iter().map(|x| x * hm).collect();
            assert!(crate::scalar::sup_distance(&s.u, &det.u) <= 1e-4);
            assert!(crate::scalar::sup_distance(&s.v, &scaled) <= 1e-4);
        }
    }

    #[test]
    fn attractor_is_continuous_in_price() {
        let tp = tp();
        let pp = process(0.05, PriceDrift::Affine { a: 0.0, b: -0.5 });
        let rate = ExchangeRate::ExpCapped {
            floor: 0.1,
            cap: 10.0,
        };
        let gp = Grid1D::on_interval(pp.p_min, pp.p_max, 11).unwrap();
        let grid = Grid1D::new(default_k_max_noise(&tp, &rate, &gp), 41).unwrap();
        let (sol, surf, _) =
            solve_2pop_noise(&tp, &pp, &rate, Lambda2Form::Multiply, &grid, &gp, &opts()).unwrap();
        assert!(surf.is_continuous(&sol, &tp, 1e-9));
        for m in 0..gp.len() {
            assert!(sol.slice(m).is_monotone(1e-9));
        }
        // a stronger foreign currency favours population 2
        assert!(surf.l_star.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn rejects_oversized_grids() {
        let tp = tp();
        let pp = process(0.1, PriceDrift::Constant { a: 0.0 });
        let grid = Grid1D::new(tp.default_k_max(), 100).unwrap();
        let gp = Grid1D::on_interval(pp.p_min, pp.p_max, 30).unwrap();
        let rate = ExchangeRate::Constant { value: 1.0 };
        assert!(matches!(
            solve_2pop_noise(&tp, &pp, &rate, Lambda2Form::Multiply, &grid, &gp, &opts()),
            Err(Error::InvalidGrid(_))
        ));
    }
}
