//! CSV and JSON export.
//!
//! Every floating-point number is written with 17 significant digits in
//! scientific notation, so files are byte-stable and round-trip exactly.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::Result;
use crate::experiments::{CrossCheckRow, HashrateSeries, SweepResult};
use crate::hjb::PotentialSolution;
use crate::model::{Trajectory, ValueFunction1D};
use crate::noise::{TargetCurve, ValueFunction2D};
use crate::obstacle::ConvergenceRow;
use crate::scalar::Real;
use crate::twopop::ValueFunctionPair;
use crate::twopop_noise::TwoPopNoiseSolution;

/// `x` with 17 significant digits, e.g. `4.2766058571198780e0`.
pub fn fmt_real<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

fn csv_err(e: csv::Error) -> crate::error::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e.into(),
        other => io::Error::other(format!("{other:?}")).into(),
    }
}

/// Writes a header and rows of pre-formatted cells.
pub fn write_rows<W: Write, R, I>(w: W, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(csv_err)?;
    for row in rows {
        out.write_record(row).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a header and numeric rows.
pub fn write_table<W: Write, T: Real, I>(w: W, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<T>>,
{
    write_rows(
        w,
        header,
        rows.into_iter().map(|r| r.into_iter().map(fmt_real)),
    )
}

/// Columns `K, U`.
pub fn value_function_csv<W: Write, T: Real>(w: W, u: &ValueFunction1D<T>) -> Result<()> {
    let rows = u
        .grid
        .nodes()
        .iter()
        .zip(&u.values)
        .map(|(&k, &v)| vec![k, v]);
    write_table(w, &["K", "U"], rows)
}

/// Columns `t` followed by the state labels.
pub fn trajectory_csv<W: Write, T: Real>(w: W, path: &Trajectory<T>) -> Result<()> {
    let mut header = vec!["t"];
    header.extend(path.labels.iter().copied());
    let rows = path.times.iter().zip(&path.states).map(|(&t, s)| {
        let mut row = vec![t];
        row.extend_from_slice(s);
        row
    });
    write_table(w, &header, rows)
}

/// Columns `K, p, U`, price-major.
pub fn value_function_2d_csv<W: Write, T: Real>(w: W, u: &ValueFunction2D<T>) -> Result<()> {
    let nk = u.grid_k.len();
    let rows = u.grid_p.nodes().iter().enumerate().flat_map(|(j, &p)| {
        u.grid_k
            .nodes()
            .iter()
            .enumerate()
            .map(move |(i, &k)| vec![k, p, u.values[j * nk + i]])
    });
    write_table(w, &["K", "p", "U"], rows)
}

/// Columns `p, k_star`.
pub fn target_curve_csv<W: Write, T: Real>(w: W, c: &TargetCurve<T>) -> Result<()> {
    let rows = c.p.iter().zip(&c.k_star).map(|(&p, &k)| vec![p, k]);
    write_table(w, &["p", "k_star"], rows)
}

/// Columns `K, L, U, V`.
pub fn pair_csv<W: Write, T: Real>(w: W, uv: &ValueFunctionPair<T>) -> Result<()> {
    let nodes = uv.grid.nodes();
    let rows = nodes.iter().enumerate().flat_map(|(j, &l)| {
        nodes.iter().enumerate().map(move |(i, &k)| {
            let at = uv.idx(i, j);
            vec![k, l, uv.u[at], uv.v[at]]
        })
    });
    write_table(w, &["K", "L", "U", "V"], rows)
}

/// Columns `K, L, p, U, V`.
pub fn pair_noise_csv<W: Write, T: Real>(w: W, sol: &TwoPopNoiseSolution<T>) -> Result<()> {
    let nodes = sol.grid.nodes();
    let n = nodes.len();
    let rows = sol.grid_p.nodes().iter().enumerate().flat_map(|(m, &p)| {
        (0..n).flat_map(move |j| {
            (0..n).map(move |i| {
                let at = (m * n + j) * n + i;
                vec![nodes[i], nodes[j], p, sol.u[at], sol.v[at]]
            })
        })
    });
    write_table(w, &["K", "L", "p", "U", "V"], rows)
}

/// Columns `eta, k_star_eta, sup_gap`.
pub fn convergence_csv<W: Write, T: Real>(w: W, rows: &[ConvergenceRow<T>]) -> Result<()> {
    let rows = rows.iter().map(|r| vec![r.eta, r.k_star_eta, r.sup_gap]);
    write_table(w, &["eta", "k_star_eta", "sup_gap"], rows)
}

/// Columns `K, Phi, Phi_prime, U, gap` where `gap = |Phi_prime - U|`.
pub fn potential_csv<W: Write, T: Real>(
    w: W,
    phi: &PotentialSolution<T>,
    u: &ValueFunction1D<T>,
) -> Result<()> {
    let d = phi.derivative();
    let rows = (0..d.len()).map(|i| {
        vec![
            phi.grid.nodes()[i],
            phi.phi_values[i],
            d[i],
            u.values[i],
            (d[i] - u.values[i]).abs(),
        ]
    });
    write_table(w, &["K", "Phi", "Phi_prime", "U", "gap"], rows)
}

/// Columns `param, k_star, u_star, pi_star`.
pub fn sweep_csv<W: Write, T: Real>(w: W, s: &SweepResult<T>) -> Result<()> {
    let rows = s
        .values
        .iter()
        .zip(&s.reports)
        .map(|(&x, r)| vec![x, r.k_star, r.u_star, r.pi_star]);
    write_table(w, &["param", "k_star", "u_star", "pi_star"], rows)
}

/// Columns `param, k_star_closed, k_star_pde, rel_err`.
pub fn cross_check_csv<W: Write, T: Real>(w: W, rows: &[CrossCheckRow<T>]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|r| vec![r.param, r.k_star_closed, r.k_star_pde, r.rel_err]);
    write_table(
        w,
        &["param", "k_star_closed", "k_star_pde", "rel_err"],
        rows,
    )
}

/// Columns `timestamp, hashrate`, plus `real_hashrate` when derived.
pub fn hashrate_csv<W: Write, T: Real>(w: W, s: &HashrateSeries<T>) -> Result<()> {
    let mut header = vec!["timestamp", "hashrate"];
    if s.real.is_some() {
        header.push("real_hashrate");
    }
    let rows = (0..s.len()).map(|i| {
        let mut row = vec![
            s.timestamps[i].to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            fmt_real(s.nominal[i]),
        ];
        if let Some(real) = &s.real {
            row.push(fmt_real(real.values[i]));
        }
        row
    });
    write_rows(w, &header, rows)
}

/// Pretty JSON whose floats carry 17 significant digits.
#[derive(Default)]
pub struct FixedDigits<'a>(PrettyFormatter<'a>);

impl Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with 17-digit floats and a trailing
/// newline.
pub fn write_json<W: Write, S: Serialize + ?Sized>(mut w: W, value: &S) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(&mut w, FixedDigits::default());
    value.serialize(&mut ser).map_err(io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn to_json_string<S: Serialize + ?Sized>(value: &S) -> Result<String> {
    let mut buf = Vec::new();
    write_json(&mut buf, value)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::read_hashrate_csv;
    use crate::model::{Grid1D, ModelParams};
    use proptest::prelude::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_real(0.1_f64), "1.0000000000000001e-1");
        assert_eq!(fmt_real(4.0_f64), "4.0000000000000000e0");
        assert_eq!(fmt_real(-2.5e-300_f64), "-2.5000000000000000e-300");
    }

    #[test]
    fn json_floats_and_roundtrip() {
        let p = ModelParams::<f64>::baseline();
        let s = to_json_string(&p).unwrap();
        assert!(s.contains("\"lambda\": 1.0000000000000000e0"), "{s}");
        assert!(s.contains("\"eps\": 0.0000000000000000e0"), "{s}");
        let back: ModelParams<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn value_csv_layout() {
        let g = Grid1D::new(2.0, 3).unwrap();
        let u = ValueFunction1D::new(g, vec![3.0, 2.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        value_function_csv(&mut buf, &u).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("K,U"));
        assert_eq!(
            lines.next(),
            Some("0.0000000000000000e0,3.0000000000000000e0")
        );
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn hashrate_csv_reads_back() {
        let csv = "timestamp,hashrate\n2020-01-01T00:00:00Z,1e20\n2021-01-01T00:00:00Z,2e20\n";
        let s: HashrateSeries<f64> = read_hashrate_csv(csv.as_bytes()).unwrap();
        let mut buf = Vec::new();
        hashrate_csv(&mut buf, &s).unwrap();
        let back: HashrateSeries<f64> = read_hashrate_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn formatted_values_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let s = fmt_real(x);
            prop_assert_eq!(s.parse::<f64>().unwrap(), x);
            let j = to_json_string(&x).unwrap();
            prop_assert_eq!(serde_json::from_str::<f64>(&j).unwrap(), x);
        }
    }
}
