//! Tridiagonal solves and the implicit pseudo-time driver built on them.

use crate::scalar::Real;

/// Tridiagonal system `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
#[derive(Debug, Clone)]
pub(crate) struct Tridiag<T> {
    pub sub: Vec<T>,
    pub diag: Vec<T>,
    pub sup: Vec<T>,
    pub rhs: Vec<T>,
}

impl<T: Real> Tridiag<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            sub: vec![T::zero(); n],
            diag: vec![T::zero(); n],
            sup: vec![T::zero(); n],
            rhs: vec![T::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    /// Thomas algorithm; `rhs` is overwritten with the solution. Requires
    /// diagonal dominance (no pivoting).
    pub fn solve_in_place(&mut self, scratch: &mut Vec<T>) -> &[T] {
        let n = self.len();
        scratch.clear();
        scratch.resize(n, T::zero());
        let (a, b, c, d) = (&self.sub, &self.diag, &self.sup, &mut self.rhs);
        scratch[0] = c[0] / b[0];
        d[0] /= b[0];
        for i in 1..n {
            let m = b[i] - a[i] * scratch[i - 1];
            scratch[i] = c[i] / m;
            d[i] = (d[i] - a[i] * d[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            let next = d[i + 1];
            d[i] -= scratch[i] * next;
        }
        &self.rhs
    }
}

/// Outcome of a pseudo-time march.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MarchStats<T> {
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Marches `∂_τ u = F(u)` to steady state with linearly implicit
/// (backward-Euler/Newton) steps.
///
/// `eval(u, sys)` must store `F(u)` in `sys.rhs` and `-∂F/∂u` in the three
/// bands; it returns the sup norm of `F`. The step `dtau` starts at
/// `dtau0` and grows by the residual ratio after accepted steps
/// (switched evolution relaxation); rejected steps shrink it.
pub(crate) fn pseudo_time_march<T, E>(
    u: &mut [T],
    mut eval: E,
    dtau0: T,
    tol: T,
    max_iters: usize,
) -> MarchStats<T>
where
    T: Real,
    E: FnMut(&[T], &mut Tridiag<T>) -> T,
{
    let n = u.len();
    let mut sys = Tridiag::zeros(n);
    let mut trial_sys = Tridiag::zeros(n);
    let mut scratch = Vec::with_capacity(n);
    let mut trial = vec![T::zero(); n];
    let dtau_max = T::lit(1e30).min(T::max_value() / T::lit(1e3));
    let dtau_min = dtau0 * T::lit(1e-12);

    let mut res = eval(u, &mut sys);
    let mut dtau = dtau0;
    let mut iterations = 0;
    while res > tol && iterations < max_iters {
        iterations += 1;
        let mut step = sys.clone();
        let shift = dtau.recip();
        for d in step.diag.iter_mut() {
            *d += shift;
        }
        let delta = step.solve_in_place(&mut scratch);
        for i in 0..n {
            trial[i] = u[i] + delta[i];
        }
        let trial_res = eval(&trial, &mut trial_sys);
        if trial_res.is_finite() && trial_res < res {
            let ratio = (res / trial_res).min(T::lit(1e3));
            u.copy_from_slice(&trial);
            std::mem::swap(&mut sys, &mut trial_sys);
            res = trial_res;
            dtau = (dtau * ratio.max(T::lit(2.0))).min(dtau_max);
        } else {
            dtau *= T::lit(0.25);
            if dtau < dtau_min {
                break;
            }
        }
    }
    MarchStats {
        residual: res,
        iterations,
        converged: res <= tol,
    }
}
