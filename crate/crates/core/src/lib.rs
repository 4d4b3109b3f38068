//! Finite-difference solvers for the mean-field game of Proof-of-Work
//! mining.
//!
//! The central object is `U(K)`, the value of one unit of real hashrate when
//! the network holds aggregate real hashrate `K`. It solves the master
//! equation
//!
//! ```text
//! 0 = -(r+δ)U + (-δK + λU) U' + 1/(K+ε) - c
//! ```
//!
//! Around it sit the stationary state and equilibrium trajectories
//! ([`det1d`]), a common-noise extension ([`noise`]), two competing
//! populations with and without noise ([`twopop`], [`twopop_noise`]), the
//! free-entry obstacle problem ([`obstacle`]), the planner's potential
//! ([`hjb`]) and comparative statics ([`experiments`]).
//!
//! Everything is generic over the scalar type through [`Real`] (`f32` or
//! `f64`); the aliases at the crate root fix `f64`.

// Negated comparisons such as `!(x > 0)` are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod det1d;
pub mod error;
pub mod experiments;
pub mod hjb;
pub mod io;
mod linalg;
pub mod model;
pub mod noise;
pub mod obstacle;
pub mod scalar;
pub mod twopop;
pub mod twopop_noise;

pub use det1d::{
    drift_root, master_residual_1d, simulate_trajectory, solve_master_1d, stationary_report,
    stationary_state_closed_form, value_oracle, SolveStats, SolverOptions,
};
pub use error::{Error, Result};
pub use experiments::{
    argmax_profit_delta, load_hashrate_csv, sweep_delta, sweep_lambda, to_real_series,
    HashrateSeries, SweepParam, SweepResult,
};
pub use hjb::{potential_check, solve_hjb, PotentialSolution};
pub use model::{
    real_hashrate, validate_params, EquilibriumReport, Grid1D, ModelParams, Trajectory,
    ValueFunction1D,
};
pub use noise::{solve_master_2d, target_curve, PriceProcess, TargetCurve, ValueFunction2D};
pub use obstacle::{solve_obstacle, solve_penalized, ObstacleSolution, PenalizedSolution};
pub use scalar::Real;
pub use twopop::{solve_system, stationary_state_2pop, TwoPopParams, ValueFunctionPair};
pub use twopop_noise::{solve_2pop_noise, TargetSurface, TwoPopNoiseSolution};

pub type ModelParams64 = ModelParams<f64>;
pub type Grid1D64 = Grid1D<f64>;
pub type ValueFunction1D64 = ValueFunction1D<f64>;
pub type ValueFunction2D64 = ValueFunction2D<f64>;
pub type ValueFunctionPair64 = ValueFunctionPair<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type EquilibriumReport64 = EquilibriumReport<f64>;
pub type SolverOptions64 = SolverOptions<f64>;
pub type PriceProcess64 = PriceProcess<f64>;
pub type TwoPopParams64 = TwoPopParams<f64>;
pub type SweepResult64 = SweepResult<f64>;
pub type HashrateSeries64 = HashrateSeries<f64>;

pub type ModelParams32 = ModelParams<f32>;
pub type Grid1D32 = Grid1D<f32>;
pub type ValueFunction1D32 = ValueFunction1D<f32>;
pub type SolverOptions32 = SolverOptions<f32>;

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
