//! One function per subcommand. Each returns its artifacts as named byte
//! buffers plus a JSON summary; nothing touches the file system here.

use std::collections::BTreeMap;

use mfg_pow::det1d::{master_residual_1d, solve_master_1d_with_stats};
use mfg_pow::experiments::{interior_unimodal_max, pde_cross_check, SweepParam};
use mfg_pow::model::default_k_max;
use mfg_pow::noise::{default_k_max_2d, drift_sign_violations, simulate_ensemble};
use mfg_pow::obstacle::{
    convergence_study, simulate_obstacle_trajectory, simulate_penalized_trajectory,
};
use mfg_pow::twopop::simulate_2pop;
use mfg_pow::twopop_noise::default_k_max_noise;
use mfg_pow::{io, Grid1D, ModelParams};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Round-off allowance for the monotonicity flags in summaries.
pub const MONOTONE_SLACK: f64 = 1e-12;

/// Every solver and experiment the CLI exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Solve1d,
    Stationary,
    Trajectory,
    Noise,
    TwoPop,
    TwoPopNoise,
    Obstacle,
    Penalized,
    HjbCheck,
    Sweep,
    Ingest,
}

impl Subcommand {
    pub const ALL: [Subcommand; 11] = [
        Subcommand::Solve1d,
        Subcommand::Stationary,
        Subcommand::Trajectory,
        Subcommand::Noise,
        Subcommand::TwoPop,
        Subcommand::TwoPopNoise,
        Subcommand::Obstacle,
        Subcommand::Penalized,
        Subcommand::HjbCheck,
        Subcommand::Sweep,
        Subcommand::Ingest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Solve1d => "solve1d",
            Subcommand::Stationary => "stationary",
            Subcommand::Trajectory => "trajectory",
            Subcommand::Noise => "noise",
            Subcommand::TwoPop => "twopop",
            Subcommand::TwoPopNoise => "twopop-noise",
            Subcommand::Obstacle => "obstacle",
            Subcommand::Penalized => "penalized",
            Subcommand::HjbCheck => "hjb-check",
            Subcommand::Sweep => "sweep",
            Subcommand::Ingest => "ingest",
        }
    }
}

impl std::str::FromStr for Subcommand {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::config("subcommand", format!("unknown subcommand {s:?}")))
    }
}

/// Artifacts of one run, keyed by file name, and a summary for the
/// manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: BTreeMap<String, Vec<u8>>,
    pub summary: Value,
}

impl Outcome {
    fn csv(
        &mut self,
        name: impl Into<String>,
        write: impl FnOnce(&mut Vec<u8>) -> mfg_pow::Result<()>,
    ) -> CliResult<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.files.insert(name.into(), buf);
        Ok(())
    }

    fn json<S: Serialize + ?Sized>(&mut self, name: impl Into<String>, value: &S) -> CliResult<()> {
        let mut buf = Vec::new();
        io::write_json(&mut buf, value)?;
        self.files.insert(name.into(), buf);
        Ok(())
    }
}

fn grid(k_max: f64, n: usize) -> CliResult<Grid1D<f64>> {
    Ok(Grid1D::new(k_max, n)?)
}

pub fn execute(cmd: Subcommand, cfg: &RunConfig) -> CliResult<Outcome> {
    match cmd {
        Subcommand::Solve1d => solve1d(cfg),
        Subcommand::Stationary => stationary(cfg),
        Subcommand::Trajectory => trajectory(cfg),
        Subcommand::Noise => noise(cfg),
        Subcommand::TwoPop => twopop(cfg),
        Subcommand::TwoPopNoise => twopop_noise(cfg),
        Subcommand::Obstacle => obstacle(cfg),
        Subcommand::Penalized => penalized(cfg),
        Subcommand::HjbCheck => hjb_check(cfg),
        Subcommand::Sweep => sweep(cfg),
        Subcommand::Ingest => ingest(cfg),
    }
}

fn solve1d(cfg: &RunConfig) -> CliResult<Outcome> {
    let p = cfg.model.validate()?;
    let g = grid(
        cfg.grid.k_max.unwrap_or_else(|| default_k_max(&p)),
        cfg.grid.n,
    )?;
    let (u, stats) = solve_master_1d_with_stats(&p, &g, &cfg.solver)?;
    let k_pde = mfg_pow::drift_root(&p, &u)?;
    let k_closed = mfg_pow::stationary_state_closed_form(&p);
    let summary = json!({
        "k_star_pde": k_pde,
        "k_star_closed_form": k_closed,
        "rel_err": (k_pde - k_closed).abs() / k_closed,
        "residual": master_residual_1d(&p, &u),
        "iterations": stats.iterations,
        "non_increasing": u.is_non_increasing(MONOTONE_SLACK),
        "n": g.len(),
        "k_max": g.k_max(),
    });
    let mut out = Outcome::default();
    out.csv("value.csv", |w| io::value_function_csv(w, &u))?;
    out.json("solve1d.json", &summary)?;
    out.summary = summary;
    Ok(out)
}

fn stationary(cfg: &RunConfig) -> CliResult<Outcome> {
    let report = mfg_pow::stationary_report(&cfg.model)?;
    let mut out = Outcome::default();
    out.json("stationary.json", &report)?;
    out.summary = serde_json::to_value(report).expect("report serializes");
    Ok(out)
}

fn trajectory(cfg: &RunConfig) -> CliResult<Outcome> {
    let p = cfg.model.validate()?;
    let t = &cfg.trajectory;
    let g = grid(
        cfg.grid.k_max.unwrap_or_else(|| default_k_max(&p)),
        cfg.grid.n,
    )?;
    let (u, stats) = solve_master_1d_with_stats(&p, &g, &cfg.solver)?;
    let k_star = mfg_pow::drift_root(&p, &u)?;
    let starts = t.k0.clone().unwrap_or_else(|| vec![0.0, 2.0 * k_star]);
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    for (i, &k0) in starts.iter().enumerate() {
        let path = mfg_pow::simulate_trajectory(&p, &u, k0, t.horizon, t.dt)?;
        let terminal = path.terminal()[0];
        rows.push(json!({ "k0": k0, "terminal": terminal, "gap": (terminal - k_star).abs() }));
        out.csv(format!("trajectory_{i}.csv"), |w| {
            io::trajectory_csv(w, &path)
        })?;
    }
    let summary = json!({
        "k_star": k_star,
        "solver_residual": stats.residual,
        "iterations": stats.iterations,
        "paths": rows,
    });
    out.json("trajectory.json", &summary)?;
    out.summary = summary;
    Ok(out)
}

fn noise(cfg: &RunConfig) -> CliResult<Outcome> {
    let p = cfg.model.validate()?;
    let c = &cfg.noise;
    let pp = c.price.validate(&p)?;
    let gk = grid(c.k_max.unwrap_or_else(|| default_k_max_2d(&p, &pp)), c.n_k)?;
    let gp = Grid1D::on_interval(pp.p_min, pp.p_max, c.n_p)?;
    let (u, stats) = mfg_pow::solve_master_2d(&p, &pp, &gk, &gp, &cfg.solver)?;
    let curve = mfg_pow::target_curve(&u, &p)?;
    let seeds: Vec<u64> = (0..c.paths as u64)
        .map(|i| cfg.seed.wrapping_add(i))
        .collect();
    let dt = c.dt.unwrap_or_else(|| pp.default_dt(&p));
    let paths = simulate_ensemble(&p, &pp, &u, c.k0, c.p0, c.horizon, dt, &seeds)?;
    let mut out = Outcome::default();
    out.csv("value2d.csv", |w| io::value_function_2d_csv(w, &u))?;
    out.csv("target_curve.csv", |w| io::target_curve_csv(w, &curve))?;
    let mut rows = Vec::new();
    for (path, &seed) in paths.iter().zip(&seeds) {
        let bad = drift_sign_violations(path, &curve, gk.spacing());
        rows.push(
            json!({ "seed": seed, "steps": path.len() - 1, "drift_sign_violations": bad.len() }),
        );
        out.csv(format!("path_{seed}.csv"), |w| io::trajectory_csv(w, path))?;
    }
    let summary = json!({
        "residual": stats.residual,
        "iterations": stats.iterations,
        "slices_non_increasing": u.slices_non_increasing(MONOTONE_SLACK),
        "dt": dt,
        "paths": rows,
    });
    out.json("noise.json", &summary)?;
    out.summary = summary;
    Ok(out)
}

fn twopop(cfg: &RunConfig) -> CliResult<Outcome> {
    let c = &cfg.twopop;
    let tp = c.params.validate()?;
    let g = grid(c.k_max.unwrap_or_else(|| tp.default_k_max()), c.n)?;
    let (uv, stats) = mfg_pow::solve_system(&tp, &g, &cfg.solver)?;
    let (k, l) = mfg_pow::stationary_state_2pop(&tp, &uv)?;
    let path = simulate_2pop(&tp, &uv, c.k0, c.l0, c.horizon, c.dt)?;
    let summary = json!({
        "k_star": k,
        "l_star": l,
        "residual": stats.residual,
        "iterations": stats.iterations,
        "monotone": uv.is_monotone(MONOTONE_SLACK),
        "max_coupling": uv.max_coupling(10_000, cfg.seed),
        "terminal": path.terminal(),
    });
    let mut out = Outcome::default();
    out.csv("pair.csv", |w| io::pair_csv(w, &uv))?;
    out.csv("trajectory_2pop.csv", |w| io::trajectory_csv(w, &path))?;
    out.json("stationary_2pop.json", &summary)?;
    out.summary = summary;
    Ok(out)
}

fn twopop_noise(cfg: &RunConfig) -> CliResult<Outcome> {
    let c = &cfg.twopop_noise;
    let gp = Grid1D::on_interval(c.price.p_min, c.price.p_max, c.n_p)?;
    let k_max = c
        .k_max
        .unwrap_or_else(|| default_k_max_noise(&c.params, &c.exchange_rate, &gp));
    let g = grid(k_max, c.n)?;
    let (sol, surface, stats) = mfg_pow::solve_2pop_noise(
        &c.params,
        &c.price,
        &c.exchange_rate,
        c.lambda2_form,
        &g,
        &gp,
        &c.solver,
    )?;
    let tp = c.params.validate()?;
    let summary = json!({
        "residual": stats.residual,
        "iterations": stats.iterations,
        "target_surface_continuous": surface.is_continuous(&sol, &tp, 1e-9),
        "slices_monotone": (0..gp.len()).all(|m| sol.slice(m).is_monotone(MONOTONE_SLACK)),
    });
    let mut out = Outcome::default();
    out.csv("pair_noise.csv", |w| io::pair_noise_csv(w, &sol))?;
    out.json("target_surface.json", &surface)?;
    out.json("twopop_noise.json", &summary)?;
    out.summary = summary;
    Ok(out)
}

fn obstacle(cfg: &RunConfig) -> CliResult<Outcome> {
    let p = cfg.model.validate()?;
    let e = &cfg.obstacle;
    let g = grid(e.k_max, e.n)?;
    let sol = mfg_pow::solve_obstacle(&p, &g, &cfg.solver)?;
    let mut out = Outcome::default();
    out.csv("obstacle_value.csv", |w| io::value_function_csv(w, &sol.u))?;
    let mut rows = Vec::new();
    for (i, &k0) in e.k0.iter().enumerate() {
        let path = simulate_obstacle_trajectory(&p, &sol, k0, e.horizon, e.dt)?;
        rows.push(json!({ "k0": k0, "terminal": path.terminal()[0] }));
        out.csv(format!("obstacle_path_{i}.csv"), |w| {
            io::trajectory_csv(w, &path)
        })?;
    }
    let summary = json!({
        "k_star": sol.k_star,
        "breakeven": p.breakeven(),
        "grid_spacing": g.spacing(),
        "complementarity_residual": sol.residual,
        "sweeps": sol.sweeps,
        "paths": rows,
    });
    out.json("obstacle.json", &summary)?;
    out.summary = summary;
    Ok(out)
}

fn penalized(cfg: &RunConfig) -> CliResult<Outcome> {
    let p = cfg.model.validate()?;
    let e = cfg.penalized.entry();
    let g = grid(e.k_max, e.n)?;
    let table = convergence_study(&p, &cfg.penalized.etas, &g, &cfg.solver)?;
    let mut out = Outcome::default();
    out.csv("convergence.csv", |w| io::convergence_csv(w, &table))?;
    let mut rows = Vec::new();
    for (i, &eta) in cfg.penalized.etas.iter().enumerate() {
        let sol = mfg_pow::solve_penalized(&p, eta, &g, &cfg.solver)?;
        out.csv(format!("penalized_{i}.csv"), |w| {
            io::value_function_csv(w, &sol.u)
        })?;
        let mut terminals = Vec::new();
        for (j, &k0) in e.k0.iter().enumerate() {
            let path = simulate_penalized_trajectory(&p, &sol, k0, e.horizon, e.dt)?;
            terminals.push(path.terminal()[0]);
            out.csv(format!("penalized_{i}_path_{j}.csv"), |w| {
                io::trajectory_csv(w, &path)
            })?;
        }
        rows.push(json!({
            "eta": eta,
            "k_star_closed_form": sol.k_star,
            "k_star_numeric": sol.k_star_numeric,
            "residual": sol.stats.residual,
            "terminals": terminals,
        }));
    }
    let summary = json!({ "breakeven": p.breakeven(), "etas": rows });
    out.json("penalized.json", &summary)?;
    out.summary = summary;
    Ok(out)
}

/// Potential gap on one grid.
fn potential_gap(
    p: &ModelParams<f64>,
    g: &Grid1D<f64>,
    cfg: &RunConfig,
) -> CliResult<(f64, Outcome)> {
    let phi = mfg_pow::solve_hjb(p, g, &cfg.solver)?;
    let u = mfg_pow::solve_master_1d(p, g, &cfg.solver)?;
    let gap = mfg_pow::potential_check(&phi, &u)?;
    let mut out = Outcome::default();
    out.csv("potential.csv", |w| io::potential_csv(w, &phi, &u))?;
    Ok((gap, out))
}

fn hjb_check(cfg: &RunConfig) -> CliResult<Outcome> {
    let p = ModelParams {
        eps: cfg.hjb.eps,
        ..cfg.model
    }
    .validate()?;
    let k_max = cfg.hjb.k_max.unwrap_or_else(|| default_k_max(&p));
    let g = grid(k_max, cfg.hjb.n)?;
    // twice as many intervals: the spacing halves exactly
    let fine = grid(k_max, 2 * cfg.hjb.n - 1)?;
    let (gap, mut out) = potential_gap(&p, &g, cfg)?;
    let (gap_fine, _) = potential_gap(&p, &fine, cfg)?;
    let h = g.spacing();
    let summary = json!({
        "eps": p.eps,
        "n": g.len(),
        "h": h,
        "gap": gap,
        "bound_5h": 5.0 * h,
        "n_fine": fine.len(),
        "gap_fine": gap_fine,
        "ratio": gap_fine / gap,
    });
    out.json("hjb_check.json", &summary)?;
    out.summary = summary;
    Ok(out)
}

fn sweep(cfg: &RunConfig) -> CliResult<Outcome> {
    let param = cfg
        .sweep
        .param
        .ok_or_else(|| CliError::config("sweep.param", "missing; pass --param lambda|delta"))?;
    let range = match param {
        SweepParam::Lambda => &cfg.sweep.lambda,
        SweepParam::Delta => &cfg.sweep.delta,
    };
    let result = mfg_pow::experiments::sweep(&cfg.model, param, &range.values())?;
    let name = param.name();
    let mut out = Outcome::default();
    out.csv(format!("sweep_{name}.csv"), |w| io::sweep_csv(w, &result))?;
    let pi = result.pi_star();
    let strictly = |xs: &[f64], up: bool| {
        xs.windows(2)
            .all(|w| if up { w[1] > w[0] } else { w[1] < w[0] })
    };
    let mut summary = json!({
        "param": name,
        "rows": result.values.len(),
        "max_identity_defect": result.max_identity_defect(),
        "k_star_increasing": strictly(&result.k_star(), true),
        "k_star_decreasing": strictly(&result.k_star(), false),
        "u_star_increasing": strictly(&result.u_star(), true),
        "u_star_decreasing": strictly(&result.u_star(), false),
        "pi_star_increasing": strictly(&pi, true),
        "pi_star_decreasing": strictly(&pi, false),
        "pi_star_interior_max": interior_unimodal_max(&pi).map(|i| result.values[i]),
    });
    if param == SweepParam::Delta {
        let [lo, hi] = cfg.sweep.argmax_bracket;
        summary["argmax_delta"] = match mfg_pow::argmax_profit_delta(&cfg.model, (lo, hi)) {
            Ok(d) => json!({ "delta_star": d }),
            Err(e @ mfg_pow::Error::NoInteriorMaximum { .. }) => json!({ "error": e.to_string() }),
            Err(e) => return Err(e.into()),
        };
    }
    if cfg.sweep.pde_check {
        let rows = pde_cross_check(&result, cfg.sweep.pde_samples, cfg.sweep.pde_n, &cfg.solver)?;
        let worst = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
        out.csv(format!("cross_check_{name}.csv"), |w| {
            io::cross_check_csv(w, &rows)
        })?;
        summary["pde_max_rel_err"] = json!(worst);
    }
    out.json(format!("sweep_{name}.json"), &summary)?;
    out.summary = summary;
    Ok(out)
}

fn ingest(cfg: &RunConfig) -> CliResult<Outcome> {
    let path = cfg
        .ingest
        .path
        .as_ref()
        .ok_or_else(|| CliError::config("ingest.path", "missing; pass --input FILE"))?;
    let series = mfg_pow::load_hashrate_csv::<f64>(path).map_err(|e| match e {
        mfg_pow::Error::Io(source) => CliError::io(path, source),
        other => other.into(),
    })?;
    let delta = cfg.ingest.delta.unwrap_or(cfg.model.delta);
    let real = mfg_pow::to_real_series(&series, delta)?;
    let summary = json!({
        "rows": real.len(),
        "delta": delta,
        "first": real.timestamps.first().map(|t| t.to_rfc3339()),
        "last": real.timestamps.last().map(|t| t.to_rfc3339()),
    });
    let mut out = Outcome::default();
    out.csv("hashrate_real.csv", |w| io::hashrate_csv(w, &real))?;
    out.json("ingest.json", &summary)?;
    out.summary = summary;
    Ok(out)
}
