//! CSV writers for every artifact: long-format matrix dumps, flat
//! `name,value` tables and wide per-`k` series for plotting.

use std::io::Write;

use csv::Writer;

use crate::equilibrium::{CostReport, GapReport, StrategyProfile};
use crate::error::Result;
use crate::filter::{covariance_gap, CovarianceSchedule};
use crate::linalg::Mat;
use crate::montecarlo::{CostEstimate, NashCertificate, Trajectory};
use crate::riccati::{RiccatiTrajectory, SteadyRiccati};

/// Formats with `-0` folded into `0`.
fn num(v: f64) -> String {
    (v + 0.0).to_string()
}

fn long_rows<W: Write>(w: &mut Writer<W>, k: usize, name: &str, m: &Mat) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_record([k.to_string(), name.to_string(), i.to_string(), j.to_string(), num(m[(i, j)])])?;
        }
    }
    Ok(())
}

/// `k,matrix,i,j,value` for `P1, Phi1, P2, Phi2`, `k = 0..=N+1`.
pub fn write_riccati<W: Write>(out: W, rt: &RiccatiTrajectory) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(["k", "matrix", "i", "j", "value"])?;
    for k in 0..rt.p1.len() {
        long_rows(&mut w, k, "P1", &rt.p1[k])?;
        long_rows(&mut w, k, "Phi1", &rt.phi1[k])?;
        long_rows(&mut w, k, "P2", &rt.p2[k])?;
        long_rows(&mut w, k, "Phi2", &rt.phi2[k])?;
    }
    w.flush()?;
    Ok(())
}

/// `k,matrix,i,j,value` for `K1, K2`, `k = 0..=N`.
pub fn write_gains<W: Write>(out: W, profile: &StrategyProfile) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(["k", "matrix", "i", "j", "value"])?;
    for k in 0..=profile.horizon() {
        long_rows(&mut w, k, "K1", &profile.k1[k])?;
        long_rows(&mut w, k, "K2", &profile.k2[k])?;
    }
    w.flush()?;
    Ok(())
}

/// `k,tr_sigma1_pred,tr_sigma2_pred,min_eig_gap`, `k = 0..=N+1`.
pub fn write_covariances<W: Write>(out: W, sched: &CovarianceSchedule) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(["k", "tr_sigma1_pred", "tr_sigma2_pred", "min_eig_gap"])?;
    for row in covariance_gap(sched) {
        w.write_record([
            row.k.to_string(),
            row.tr_sigma1.to_string(),
            row.tr_sigma2.to_string(),
            row.min_eig.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Flat `name,value` table.
pub fn write_name_values<W: Write>(out: W, rows: &[(String, f64)]) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(["name", "value"])?;
    for (name, v) in rows {
        w.write_record([name.as_str(), &v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cost_rows(prefix: &str, r: &CostReport) -> Vec<(String, f64)> {
    let mut rows = vec![(format!("{prefix}J1"), r.j1), (format!("{prefix}J2"), r.j2)];
    rows.extend(r.terms.iter().map(|(n, v)| (format!("{prefix}{n}"), *v)));
    rows
}

pub fn gap_rows(g: &GapReport) -> Vec<(String, f64)> {
    let mut rows: Vec<(String, f64)> = g.terms().iter().map(|(n, v)| (n.to_string(), *v)).collect();
    rows.push(("sum".into(), g.sum));
    rows.push(("direct_difference".into(), g.direct_difference));
    rows.push(("residual".into(), g.residual));
    rows
}

/// `quantity,i,j,value`; scalar quantities leave `i,j` empty.
pub fn write_steady<W: Write>(out: W, sr: &SteadyRiccati, extra: &[(String, Mat)], spectra: (f64, f64)) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(["quantity", "i", "j", "value"])?;
    let named = [
        ("P1", &sr.p1),
        ("Phi1", &sr.phi1),
        ("P2", &sr.p2),
        ("Phi2", &sr.phi2),
        ("K1", &sr.k1),
        ("K2", &sr.k2),
    ];
    for (name, m) in named.into_iter().chain(extra.iter().map(|(n, m)| (n.as_str(), m))) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                w.write_record([name, &i.to_string(), &j.to_string(), &num(m[(i, j)])])?;
            }
        }
    }
    for (name, v) in [
        ("rho_closed_loop1", spectra.0),
        ("rho_closed_loop2", spectra.1),
        ("iterations", sr.iterations as f64),
        ("residual", sr.residual),
    ] {
        w.write_record([name, "", "", &v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Values reported for the built-in example, in the order
/// symmetric `J1, J2`, asymmetric `J1, J2`.
pub const REFERENCE_TABLE: [f64; 4] = [24.4764, 25.1805, 27.3403, 28.6230];

#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub cost: &'static str,
    pub analytic: f64,
    pub exact: f64,
    pub mc: Option<(f64, f64)>,
    pub reference: Option<f64>,
}

/// `cost,analytic,exact,mc_mean,mc_stderr,reference,delta` where
/// `delta = analytic - reference`.
pub fn write_table1<W: Write>(out: W, rows: &[Table1Row]) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(["cost", "analytic", "exact", "mc_mean", "mc_stderr", "reference", "delta"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.cost.to_string(),
            r.analytic.to_string(),
            r.exact.to_string(),
            opt(r.mc.map(|m| m.0)),
            opt(r.mc.map(|m| m.1)),
            opt(r.reference),
            opt(r.reference.map(|p| r.analytic - p)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of `table1.csv` from the four analytic costs, their exact
/// counterparts and optional Monte Carlo estimates.
pub fn table1_rows(
    sym: &CostReport,
    asym: &CostReport,
    exact_sym: (f64, f64),
    exact_asym: (f64, f64),
    mc: Option<(CostEstimate, CostEstimate)>,
    with_reference: bool,
) -> Vec<Table1Row> {
    let refs = |i: usize| with_reference.then_some(REFERENCE_TABLE[i]);
    let mc_of = |e: Option<CostEstimate>, p: usize| {
        e.map(|e| if p == 1 { (e.mean1, e.stderr1) } else { (e.mean2, e.stderr2) })
    };
    let (ms, ma) = (mc.map(|m| m.0), mc.map(|m| m.1));
    vec![
        Table1Row {
            cost: "sym_J1",
            analytic: sym.j1,
            exact: exact_sym.0,
            mc: mc_of(ms, 1),
            reference: refs(0),
        },
        Table1Row {
            cost: "sym_J2",
            analytic: sym.j2,
            exact: exact_sym.1,
            mc: mc_of(ms, 2),
            reference: refs(1),
        },
        Table1Row {
            cost: "asym_J1",
            analytic: asym.j1,
            exact: exact_asym.0,
            mc: mc_of(ma, 1),
            reference: refs(2),
        },
        Table1Row {
            cost: "asym_J2",
            analytic: asym.j2,
            exact: exact_asym.1,
            mc: mc_of(ma, 2),
            reference: refs(3),
        },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyRow {
    pub check: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// `check,value,threshold,pass`
pub fn write_verify<W: Write>(out: W, rows: &[VerifyRow]) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(["check", "value", "threshold", "pass"])?;
    for r in rows {
        w.write_record([r.check.clone(), r.value.to_string(), r.threshold.to_string(), r.pass.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `player,direction,epsilon,delta_j,stderr,pass,note`
pub fn write_certificate<W: Write>(out: W, cert: &NashCertificate) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(["player", "direction", "epsilon", "delta_j", "stderr", "pass", "note"])?;
    for d in &cert.deviations {
        w.write_record([
            d.player.to_string(),
            d.direction.clone(),
            d.epsilon.to_string(),
            d.delta_j.to_string(),
            d.stderr.to_string(),
            d.pass.to_string(),
            d.note.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn wide_header(prefix: &str, m: &Mat) -> Vec<String> {
    let mut h = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            h.push(format!("{prefix}_{i}{j}"));
        }
    }
    h
}

fn wide_values(m: &Mat, row: &mut Vec<String>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            row.push(num(m[(i, j)]));
        }
    }
}

/// One row per `k` with the entries of every named series.
pub fn write_wide<W: Write>(out: W, series: &[(&str, &[Mat])]) -> Result<()> {
    let mut w = Writer::from_writer(out);
    let mut header = vec!["k".to_string()];
    for (name, s) in series {
        header.extend(wide_header(name, &s[0]));
    }
    w.write_record(&header)?;
    let len = series.iter().map(|(_, s)| s.len()).min().unwrap_or(0);
    for k in 0..len {
        let mut row = vec![k.to_string()];
        for (_, s) in series {
            wide_values(&s[k], &mut row);
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `k,tr_sigma1,tr_sigma2`
pub fn write_sigma_trace<W: Write>(out: W, sched: &CovarianceSchedule) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(["k", "tr_sigma1", "tr_sigma2"])?;
    for (k, (a, b)) in sched.sigma1_pred.iter().zip(&sched.sigma2_pred).enumerate() {
        w.write_record([k.to_string(), a.trace().to_string(), b.trace().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `k,x_1..,xhat1_1..,xhat2_1..,u1_1..,u2_1..`; actions are empty at `N+1`.
pub fn write_trajectory<W: Write>(out: W, t: &Trajectory) -> Result<()> {
    let mut w = Writer::from_writer(out);
    fn names(p: &'static str, len: usize) -> impl Iterator<Item = String> {
        (1..=len).map(move |i| format!("{p}_{i}"))
    }
    let (n, m1, m2) = (t.x[0].len(), t.u1[0].len(), t.u2[0].len());
    let header: Vec<String> = std::iter::once("k".to_string())
        .chain(names("x", n))
        .chain(names("xhat1", n))
        .chain(names("xhat2", n))
        .chain(names("u1", m1))
        .chain(names("u2", m2))
        .collect();
    w.write_record(&header)?;
    for k in 0..t.x.len() {
        let mut row = vec![k.to_string()];
        for v in [&t.x[k], &t.xhat1_pred[k], &t.xhat2_pred[k]] {
            row.extend(v.iter().map(|x| x.to_string()));
        }
        match (t.u1.get(k), t.u2.get(k)) {
            (Some(u1), Some(u2)) => {
                row.extend(u1.iter().chain(u2.iter()).map(|x| x.to_string()));
            }
            _ => row.extend(std::iter::repeat_n(String::new(), m1 + m2)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
