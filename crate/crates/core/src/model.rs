//! Parameter records, grids and solution containers shared by every solver.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Scalar calibration of the baseline mining game.
///
/// `lam` serializes as `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams<T> {
    /// Discount rate.
    pub r: T,
    /// Technological-progress rate; real hashrate depreciates at this rate.
    pub delta: T,
    /// Inverse friction on the hardware market.
    #[serde(rename = "lambda")]
    pub lam: T,
    /// Electricity cost per unit of real hashrate per unit time.
    pub c: T,
    /// Size of a single machine in real hashrate.
    pub eps: T,
}

impl<T: Real> ModelParams<T> {
    /// r = 5%, δ = 20%, λ = 1, c = 0.02, ε = 0.
    pub fn baseline() -> Self {
        Self {
            r: T::lit(0.05),
            delta: T::lit(0.2),
            lam: T::one(),
            c: T::lit(0.02),
            eps: T::zero(),
        }
    }

    pub fn validate(self) -> Result<Self> {
        let positive = [
            ("r", self.r),
            ("delta", self.delta),
            ("lambda", self.lam),
            ("c", self.c),
        ];
        for (field, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.eps >= T::zero()) || !self.eps.is_finite() {
            return Err(invalid(
                "eps",
                format!("must be finite and >= 0, got {}", self.eps),
            ));
        }
        if !(self.c * self.eps < T::one()) {
            return Err(invalid(
                "eps",
                format!(
                    "c*eps must be < 1 for a positive stationary state, got {}",
                    self.c * self.eps
                ),
            ));
        }
        Ok(self)
    }

    /// Effective discount r + δ of one unit of real hashrate.
    #[inline]
    pub fn discount(&self) -> T {
        self.r + self.delta
    }

    /// Largest aggregate hashrate at which mining still covers its cost.
    #[inline]
    pub fn breakeven(&self) -> T {
        self.c.recip() - self.eps
    }
}

pub fn validate_params<T: Real>(p: ModelParams<T>) -> Result<ModelParams<T>> {
    p.validate()
}

/// Nominal hashrate expressed in machines of the technology available at
/// time 0: `e^{-δt} P_t`.
#[inline]
pub fn real_hashrate<T: Real>(nominal: T, delta: T, t: T) -> T {
    nominal * (-delta * t).exp()
}

/// Per-unit mining reward `1/(K+ε)`.
///
/// With `ε = 0` the reward is evaluated as `1/max(K, h)`, so the node at
/// `K = 0` sees `1/h` instead of a pole.
#[inline]
pub fn unit_reward<T: Real>(k: T, eps: T, h: T) -> T {
    if eps > T::zero() {
        (k + eps).recip()
    } else {
        k.max(h).recip()
    }
}

/// Uniform partition of `[0, k_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D<T> {
    k_max: T,
    nodes: Vec<T>,
}

impl<T: Real> Grid1D<T> {
    pub fn new(k_max: T, n: usize) -> Result<Self> {
        Self::on_interval(T::zero(), k_max, n)
    }

    /// Uniform partition of `[lo, hi]`; used for the price axis.
    pub fn on_interval(lo: T, hi: T, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes, got {n}"
            )));
        }
        if !(hi > lo) || !hi.is_finite() || !lo.is_finite() {
            return Err(Error::InvalidGrid(format!("empty interval [{lo}, {hi}]")));
        }
        let last = T::of_usize(n - 1);
        let mut nodes: Vec<T> = (0..n)
            .map(|i| lo + (hi - lo) * T::of_usize(i) / last)
            .collect();
        nodes[n - 1] = hi;
        Ok(Self { k_max: hi, nodes })
    }

    /// Grid on `[0, default_k_max(p)]`.
    pub fn for_params(p: &ModelParams<T>, n: usize) -> Result<Self> {
        Self::new(default_k_max(p), n)
    }

    #[inline]
    pub fn k_max(&self) -> T {
        self.k_max
    }

    #[inline]
    pub fn lo(&self) -> T {
        self.nodes[0]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn spacing(&self) -> T {
        (self.k_max - self.nodes[0]) / T::of_usize(self.nodes.len() - 1)
    }

    #[inline]
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Cell index and barycentric weight of `x`, clamped to the grid.
    pub fn locate(&self, x: T) -> (usize, T) {
        let n = self.nodes.len();
        let s = (x - self.nodes[0]) / self.spacing();
        if !(s > T::zero()) {
            return (0, T::zero());
        }
        let last = T::of_usize(n - 1);
        if s >= last {
            return (n - 2, T::one());
        }
        let i = s.floor().to_usize().unwrap_or(0).min(n - 2);
        (i, s - T::of_usize(i))
    }
}

/// Default truncation of the hashrate axis.
///
/// `max(3/c, 3K*, 1.25 (r+δ)/(r c))`. The last term bounds the zero of `U`:
/// with purchases frozen, `U(K) <= 1/(rK) - c/(r+δ)`, which is negative
/// beyond `(r+δ)/(rc)`, and purchases only lower `U` above `K*`.
pub fn default_k_max<T: Real>(p: &ModelParams<T>) -> T {
    let three = T::lit(3.0);
    let sign_change = T::lit(1.25) * p.discount() / (p.r * p.c);
    (three / p.c)
        .max(three * crate::det1d::stationary_state_closed_form(p))
        .max(sign_change)
}

/// Value of one unit of real hashrate sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction1D<T> {
    pub grid: Grid1D<T>,
    pub values: Vec<T>,
}

impl<T: Real> ValueFunction1D<T> {
    pub fn new(grid: Grid1D<T>, values: Vec<T>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::GridMismatch(format!(
                "{} nodes but {} values",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Piecewise-linear interpolation, constant beyond the grid ends.
    pub fn eval(&self, k: T) -> T {
        let (i, w) = self.grid.locate(k);
        self.values[i] * (T::one() - w) + self.values[i + 1] * w
    }

    /// True when no value exceeds its left neighbour by more than `slack`.
    pub fn is_non_increasing(&self, slack: T) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + slack)
    }

    /// Forward differences `(U_{i+1} - U_i)/h`.
    pub fn slopes(&self) -> Vec<T> {
        let h = self.grid.spacing();
        self.values.windows(2).map(|w| (w[1] - w[0]) / h).collect()
    }

    /// First node index where the value turns negative.
    pub fn first_negative(&self) -> Option<usize> {
        self.values.iter().position(|&u| u < T::zero())
    }
}

/// Time-indexed path of the aggregate state.
///
/// Times are non-decreasing; a repeated stamp records an instantaneous
/// jump (first sample before, second after).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub labels: Vec<&'static str>,
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(labels: Vec<&'static str>) -> Self {
        Self {
            labels,
            times: Vec::new(),
            states: Vec::new(),
        }
    }

    pub fn push(&mut self, t: T, state: Vec<T>) {
        debug_assert_eq!(state.len(), self.labels.len());
        self.times.push(t);
        self.states.push(state);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn component(&self, idx: usize) -> Vec<T> {
        self.states.iter().map(|s| s[idx]).collect()
    }

    pub fn terminal(&self) -> &[T] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// State at time `t` by linear interpolation between samples; at a
    /// repeated stamp the post-jump sample wins.
    pub fn at(&self, t: T, idx: usize) -> T {
        let pos = self.times.partition_point(|&s| s <= t);
        if pos == 0 {
            return self.states[0][idx];
        }
        if pos == self.times.len() {
            return self.states[pos - 1][idx];
        }
        let (t0, t1) = (self.times[pos - 1], self.times[pos]);
        let (x0, x1) = (self.states[pos - 1][idx], self.states[pos][idx]);
        if t1 <= t0 {
            return x1;
        }
        x0 + (x1 - x0) * (t - t0) / (t1 - t0)
    }

    /// Checks the path invariants: non-decreasing times, nonnegative states.
    pub fn is_well_formed(&self) -> bool {
        self.times.windows(2).all(|w| w[1] >= w[0])
            && self.states.iter().all(|s| {
                s.iter().enumerate().all(|(j, &x)| {
                    // the price coordinate may be negative
                    self.labels[j] == "p" || x >= T::zero()
                })
            })
    }
}

/// Stationary quantities for one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport<T> {
    pub k_star: T,
    pub u_star: T,
    pub pi_star: T,
    pub residual_norm: T,
    pub iterations: usize,
}
