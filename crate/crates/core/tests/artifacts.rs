//! Exported tables read back losslessly with the documented columns.

use mfg_pow::io::{convergence_csv, sweep_csv, trajectory_csv, value_function_csv};
use mfg_pow::obstacle::convergence_study;
use mfg_pow::{
    simulate_trajectory, solve_master_1d, sweep_delta, Grid1D, ModelParams, SolverOptions,
    SweepParam,
};

fn read(bytes: &[u8]) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_reader(bytes);
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn value_and_trajectory_tables() {
    let p = ModelParams::<f64>::baseline();
    let g = Grid1D::for_params(&p, 401).unwrap();
    let u = solve_master_1d(&p, &g, &SolverOptions::default()).unwrap();
    let mut buf = Vec::new();
    value_function_csv(&mut buf, &u).unwrap();
    let (header, rows) = read(&buf);
    assert_eq!(header, ["K", "U"]);
    assert_eq!(rows.len(), 401);
    for (row, (&k, &v)) in rows.iter().zip(g.nodes().iter().zip(&u.values)) {
        assert_eq!(row, &[k, v]);
    }

    let path = simulate_trajectory(&p, &u, 1.0, 5.0, 0.5).unwrap();
    let mut buf = Vec::new();
    trajectory_csv(&mut buf, &path).unwrap();
    let (header, rows) = read(&buf);
    assert_eq!(header, ["t", "K"]);
    assert_eq!(rows.len(), path.len());
    assert_eq!(rows.last().unwrap()[1], path.terminal()[0]);
}

#[test]
fn sweep_and_convergence_tables() {
    let p = ModelParams::<f64>::baseline();
    let s = sweep_delta(&p, &SweepParam::Delta.default_values()).unwrap();
    let mut buf = Vec::new();
    sweep_csv(&mut buf, &s).unwrap();
    let (header, rows) = read(&buf);
    assert_eq!(header, ["param", "k_star", "u_star", "pi_star"]);
    assert_eq!(rows.len(), 40);
    assert_eq!(rows[3][3], s.reports[3].pi_star);

    let g = Grid1D::new(150.0, 601).unwrap();
    let table = convergence_study(&p, &[1e-2, 1e-4], &g, &SolverOptions::default()).unwrap();
    let mut buf = Vec::new();
    convergence_csv(&mut buf, &table).unwrap();
    let (header, rows) = read(&buf);
    assert_eq!(header, ["eta", "k_star_eta", "sup_gap"]);
    assert_eq!(rows.len(), 2);
}
