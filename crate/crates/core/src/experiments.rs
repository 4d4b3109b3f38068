//! Comparative statics, the profit-maximizing progress rate, and ingestion
//! of historical hashrate series.

use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::det1d::{drift_root, solve_master_1d, stationary_report, SolverOptions};
use crate::error::{invalid, Error, Result};
use crate::model::{EquilibriumReport, Grid1D, ModelParams};
use crate::scalar::Real;

/// Parameter varied in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Lambda,
    Delta,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Lambda => "lambda",
            SweepParam::Delta => "delta",
        }
    }

    fn apply<T: Real>(self, p: &ModelParams<T>, x: T) -> ModelParams<T> {
        match self {
            SweepParam::Lambda => ModelParams { lam: x, ..*p },
            SweepParam::Delta => ModelParams { delta: x, ..*p },
        }
    }

    /// Default sweep values: 41 log-spaced λ in [0.1, 10], or 40 evenly
    /// spaced δ in [0.05, 2].
    pub fn default_values<T: Real>(self) -> Vec<T> {
        match self {
            SweepParam::Lambda => log_space(T::lit(0.1), T::lit(10.0), 41),
            SweepParam::Delta => lin_space(T::lit(0.05), T::lit(2.0), 40),
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" | "lam" => Ok(SweepParam::Lambda),
            "delta" => Ok(SweepParam::Delta),
            other => Err(invalid(
                "param",
                format!("expected lambda or delta, got {other:?}"),
            )),
        }
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn lin_space<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / T::of_usize(n - 1);
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        hi
                    } else {
                        lo + step * T::of_usize(i)
                    }
                })
                .collect()
        }
    }
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn log_space<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    let mut v: Vec<T> = lin_space(lo.ln(), hi.ln(), n)
        .into_iter()
        .map(T::exp)
        .collect();
    // pin the end points exactly
    if let Some(first) = v.first_mut() {
        *first = lo;
    }
    if n > 1 {
        v[n - 1] = hi;
    }
    v
}

/// Stationary reports along one parameter axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult<T> {
    pub param: SweepParam,
    pub values: Vec<T>,
    pub reports: Vec<EquilibriumReport<T>>,
    /// The other parameters, held fixed.
    pub base: ModelParams<T>,
}

impl<T: Real> SweepResult<T> {
    pub fn k_star(&self) -> Vec<T> {
        self.reports.iter().map(|r| r.k_star).collect()
    }

    pub fn u_star(&self) -> Vec<T> {
        self.reports.iter().map(|r| r.u_star).collect()
    }

    pub fn pi_star(&self) -> Vec<T> {
        self.reports.iter().map(|r| r.pi_star).collect()
    }

    /// Largest relative defect of `Π* = δK*²/λ` and
    /// `U* = (1/(K*+ε) − c)/(r+δ)` over all rows.
    pub fn max_identity_defect(&self) -> T {
        self.values
            .iter()
            .zip(&self.reports)
            .map(|(&x, rep)| {
                let p = self.param.apply(&self.base, x);
                let pi = p.delta * rep.k_star * rep.k_star / p.lam;
                let u = ((rep.k_star + p.eps).recip() - p.c) / p.discount();
                let d1 = (rep.pi_star - pi).abs() / pi.abs();
                let d2 = (rep.u_star - u).abs() / u.abs();
                d1.max(d2)
            })
            .fold(T::zero(), T::max)
    }
}

/// Closed-form stationary reports for each value of `param`.
///
/// Points are evaluated in parallel; the output keeps the input order.
pub fn sweep<T: Real>(
    p: &ModelParams<T>,
    param: SweepParam,
    values: &[T],
) -> Result<SweepResult<T>> {
    let base = p.validate()?;
    let field = param.name();
    if values.is_empty() {
        return Err(invalid(field, "sweep needs at least one value"));
    }
    if values.iter().any(|&x| !(x > T::zero()) || !x.is_finite()) {
        return Err(invalid(field, "sweep values must be finite and > 0"));
    }
    if values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid(field, "sweep values must be strictly increasing"));
    }
    let reports = values
        .par_iter()
        .map(|&x| stationary_report(&param.apply(&base, x)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        param,
        values: values.to_vec(),
        reports,
        base,
    })
}

pub fn sweep_lambda<T: Real>(p: &ModelParams<T>, lambdas: &[T]) -> Result<SweepResult<T>> {
    sweep(p, SweepParam::Lambda, lambdas)
}

pub fn sweep_delta<T: Real>(p: &ModelParams<T>, deltas: &[T]) -> Result<SweepResult<T>> {
    sweep(p, SweepParam::Delta, deltas)
}

/// Comparison of the closed form with the PDE drift root at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossCheckRow<T> {
    pub param: T,
    pub k_star_closed: T,
    pub k_star_pde: T,
    pub rel_err: T,
}

/// Re-solves `samples` evenly chosen sweep points with the master-equation
/// solver on an `n`-node default grid.
pub fn pde_cross_check<T: Real>(
    sweep: &SweepResult<T>,
    samples: usize,
    n: usize,
    o: &SolverOptions<T>,
) -> Result<Vec<CrossCheckRow<T>>> {
    let m = sweep.values.len();
    let picks: Vec<usize> = match samples.min(m) {
        0 => vec![],
        1 => vec![0],
        s => (0..s).map(|j| j * (m - 1) / (s - 1)).collect(),
    };
    picks
        .par_iter()
        .map(|&i| {
            let x = sweep.values[i];
            let p = sweep.param.apply(&sweep.base, x);
            let g = Grid1D::for_params(&p, n)?;
            let u = solve_master_1d(&p, &g, o)?;
            let k_pde = drift_root(&p, &u)?;
            let k_closed = sweep.reports[i].k_star;
            Ok(CrossCheckRow {
                param: x,
                k_star_closed: k_closed,
                k_star_pde: k_pde,
                rel_err: (k_pde - k_closed).abs() / k_closed,
            })
        })
        .collect()
}

/// Index of the maximum when `xs` strictly increases up to it and strictly
/// decreases after it, with the maximum away from both ends.
pub fn interior_unimodal_max<T: Real>(xs: &[T]) -> Option<usize> {
    if xs.len() < 3 {
        return None;
    }
    let (imax, _) =
        xs.iter().enumerate().fold(
            (0, T::neg_infinity()),
            |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc },
        );
    let interior = imax > 0 && imax + 1 < xs.len();
    let rising = xs[..=imax].windows(2).all(|w| w[1] > w[0]);
    let falling = xs[imax..].windows(2).all(|w| w[1] < w[0]);
    (interior && rising && falling).then_some(imax)
}

/// Total miner value `Π*` as a function of the progress rate.
pub fn profit_at_delta<T: Real>(p: &ModelParams<T>, delta: T) -> Result<T> {
    Ok(stationary_report(&ModelParams { delta, ..*p })?.pi_star)
}

/// Golden-section maximizer of `Π*(δ)` on `bracket`, to `1e-6` in `δ`.
///
/// The bracket must contain an interior maximum: the centered difference
/// of `Π*` has to be positive at the left end and negative at the right.
pub fn argmax_profit_delta<T: Real>(p: &ModelParams<T>, bracket: (T, T)) -> Result<T> {
    let (lo, hi) = bracket;
    if !(lo > T::zero() && hi > lo && hi.is_finite()) {
        return Err(invalid("bracket", "need 0 < lo < hi < inf"));
    }
    let f = |d: T| profit_at_delta(p, d);
    let step = T::lit(1e-6) * (hi - lo);
    let slope = |d: T| -> Result<T> { Ok(f(d + step)? - f(d - step)?) };
    let lo_probe = if lo > step { lo } else { lo + step };
    if !(slope(lo_probe)? > T::zero() && slope(hi)? < T::zero()) {
        return Err(Error::NoInteriorMaximum {
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let tol = T::lit(1e-6);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        }
    }
    Ok((a + b) / T::lit(2.0))
}

/// Real hashrate derived from a nominal series for one progress rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealSeries<T> {
    pub delta: T,
    pub values: Vec<T>,
}

/// Historical network hashrate, in hashes per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashrateSeries<T> {
    pub timestamps: Vec<DateTime<Utc>>,
    pub nominal: Vec<T>,
    pub real: Option<RealSeries<T>>,
}

const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;

impl<T: Real> HashrateSeries<T> {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Elapsed time since the first sample, in years of 365.25 days.
    pub fn years_since_start(&self) -> Vec<T> {
        let Some(&t0) = self.timestamps.first() else {
            return vec![];
        };
        self.timestamps
            .iter()
            .map(|t| {
                let secs = (*t - t0).num_milliseconds() as f64 / 1000.0;
                T::lit(secs / SECONDS_PER_YEAR)
            })
            .collect()
    }
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc())
}

/// Parses a `timestamp,hashrate` CSV with ISO-8601 timestamps (RFC 3339,
/// naive date-times taken as UTC, or plain dates) in strictly increasing
/// order and positive hashrates.
pub fn read_hashrate_csv<T: Real, R: Read>(reader: R) -> Result<HashrateSeries<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let header = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.len() != 2 || &header[0] != "timestamp" || &header[1] != "hashrate" {
        return Err(parse_err(
            1,
            format!(
                "expected header \"timestamp,hashrate\", got {:?}",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut series = HashrateSeries {
        timestamps: vec![],
        nominal: vec![],
        real: None,
    };
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(parse_err(
                line,
                format!("expected 2 fields, got {}", rec.len()),
            ));
        }
        let t = parse_timestamp(&rec[0])
            .ok_or_else(|| parse_err(line, format!("bad ISO-8601 timestamp {:?}", &rec[0])))?;
        let v: f64 = rec[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad hashrate {:?}", &rec[1])))?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(parse_err(
                line,
                format!("hashrate must be finite and > 0, got {v}"),
            ));
        }
        if series.timestamps.last().is_some_and(|&prev| t <= prev) {
            return Err(parse_err(
                line,
                "timestamps must be strictly increasing".into(),
            ));
        }
        series.timestamps.push(t);
        series.nominal.push(T::lit(v));
    }
    if series.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    Ok(series)
}

pub fn load_hashrate_csv<T: Real>(path: impl AsRef<Path>) -> Result<HashrateSeries<T>> {
    read_hashrate_csv(std::fs::File::open(path)?)
}

/// Attaches the real hashrate `e^{-δ(t−t₀)} P_t`, with `t` in years.
pub fn to_real_series<T: Real>(series: &HashrateSeries<T>, delta: T) -> Result<HashrateSeries<T>> {
    if !(delta >= T::zero()) || !delta.is_finite() {
        return Err(invalid(
            "delta",
            format!("must be finite and >= 0, got {delta}"),
        ));
    }
    let values = series
        .years_since_start()
        .into_iter()
        .zip(&series.nominal)
        .map(|(t, &v)| crate::model::real_hashrate(v, delta, t))
        .collect();
    Ok(HashrateSeries {
        real: Some(RealSeries { delta, values }),
        ..series.clone()
    })
}
