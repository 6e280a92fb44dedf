//! Game instances: plant, sensors, noise, cost weights and information
//! structure, plus validation and the JSON model-file format.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::linalg::{
    block_diag, hstack, is_psd, is_symmetric, min_sym_eig, pbh_controllable, pbh_observable,
    psd_sqrt, vstack, Mat, Vector,
};

/// Plant `x' = A x + B1 u1 + B2 u2 + w`, sensors `y_i = C_i x + v_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub a: Mat,
    pub b1: Mat,
    pub b2: Mat,
    pub c1: Mat,
    pub c2: Mat,
    pub qw: Mat,
    pub qv1: Mat,
    pub qv2: Mat,
    pub mu: Vector,
    pub sigma: Mat,
}

impl SystemModel {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m1(&self) -> usize {
        self.b1.ncols()
    }
    pub fn m2(&self) -> usize {
        self.b2.ncols()
    }
    pub fn p1(&self) -> usize {
        self.c1.nrows()
    }
    pub fn p2(&self) -> usize {
        self.c2.nrows()
    }
}

/// Quadratic cost weights of both players and the terminal conditions of
/// the four Riccati families.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    pub q1: Mat,
    pub q2: Mat,
    pub s1: Mat,
    pub s2: Mat,
    pub r1: Mat,
    pub r2: Mat,
    pub p1_term: Mat,
    pub phi1_term: Mat,
    pub p2_term: Mat,
    pub phi2_term: Mat,
}

impl CostWeights {
    /// Terminal state weight player 1 pays on `x_{N+1}`.
    pub fn terminal_state_weight1(&self) -> &Mat {
        &self.p1_term
    }

    /// Terminal state weight player 2 pays on `x_{N+1}`. Player 2's
    /// common-estimate family carries the nonzero terminal condition.
    pub fn terminal_state_weight2(&self) -> &Mat {
        &self.phi2_term
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InfoStructure {
    /// Player 1 sees only its own delayed measurements; player 2 sees both.
    #[default]
    Asymmetric,
    /// Both players condition on the full delayed measurement history.
    Symmetric,
}

impl fmt::Display for InfoStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InfoStructure::Asymmetric => f.write_str("asymmetric"),
            InfoStructure::Symmetric => f.write_str("symmetric"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub system: SystemModel,
    pub weights: CostWeights,
    pub horizon: usize,
    pub info: InfoStructure,
}

/// Stacked matrices shared by both players.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedModel {
    pub a: Mat,
    /// `[B1 B2]`
    pub b: Mat,
    pub b2: Mat,
    pub c1: Mat,
    /// `[C1; C2]`
    pub c: Mat,
    pub qv1: Mat,
    /// `blockdiag(Qv1, Qv2)`
    pub qv: Mat,
    pub qw: Mat,
    /// `diag(S1, R1)`
    pub gamma1: Mat,
    /// `diag(S2, R2)`
    pub gamma2: Mat,
    pub m1: usize,
}

impl AugmentedModel {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m2(&self) -> usize {
        self.b2.ncols()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
}

pub fn augment(spec: &ProblemSpec) -> AugmentedModel {
    let s = &spec.system;
    let w = &spec.weights;
    AugmentedModel {
        a: s.a.clone(),
        b: hstack(&s.b1, &s.b2),
        b2: s.b2.clone(),
        c1: s.c1.clone(),
        c: vstack(&s.c1, &s.c2),
        qv1: s.qv1.clone(),
        qv: block_diag(&s.qv1, &s.qv2),
        qw: s.qw.clone(),
        gamma1: block_diag(&w.s1, &w.r1),
        gamma2: block_diag(&w.s2, &w.r2),
        m1: s.m1(),
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Fatal,
    Warning,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub severity: Severity,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

/// Structural checks the steady-state solvers rely on.
const STEADY_CHECKS: [&str; 5] = [
    "stabilizable (A,B)",
    "stabilizable (A,B2)",
    "detectable (A,Q1^1/2)",
    "detectable (A,Q2^1/2)",
    "observable (A,C)",
];

impl ValidationReport {
    fn push(&mut self, name: impl Into<String>, severity: Severity, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            severity,
            passed,
            detail,
        });
    }

    /// True when no fatal check failed.
    pub fn passed(&self) -> bool {
        self.fatal().next().is_none()
    }

    pub fn all_green(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn fatal(&self) -> impl Iterator<Item = &Check> {
        self.checks
            .iter()
            .filter(|c| !c.passed && c.severity == Severity::Fatal)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Check> {
        self.checks
            .iter()
            .filter(|c| !c.passed && c.severity == Severity::Warning)
    }

    /// Whether the steady-state pipeline may run.
    pub fn steady_ready(&self) -> bool {
        self.passed()
            && self
                .checks
                .iter()
                .filter(|c| STEADY_CHECKS.contains(&c.name.as_str()))
                .all(|c| c.passed)
    }

    /// Converts the first fatal failure into an error.
    pub fn ensure_valid(&self) -> Result<()> {
        match self.fatal().next() {
            None => Ok(()),
            Some(c) if c.name.starts_with("PD ") => Err(GameError::InnovationSingular {
                name: c.name[3..].to_string(),
                step: None,
            }),
            Some(c) => Err(GameError::Dimension(format!("{}: {}", c.name, c.detail))),
        }
    }

    pub fn ensure_steady_ready(&self) -> Result<()> {
        self.ensure_valid()?;
        let failed: Vec<_> = self
            .warnings()
            .filter(|c| STEADY_CHECKS.contains(&c.name.as_str()))
            .map(|c| c.name.clone())
            .collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(GameError::NotSteadyReady(failed.join(", ")))
        }
    }
}

fn shape_check(
    report: &mut ValidationReport,
    name: &str,
    m: &Mat,
    rows: usize,
    cols: usize,
) -> bool {
    let ok = m.shape() == (rows, cols);
    report.push(
        format!("shape {name}"),
        Severity::Fatal,
        ok,
        format!("expected {rows}x{cols}, got {}x{}", m.nrows(), m.ncols()),
    );
    ok
}

pub fn validate(spec: &ProblemSpec) -> ValidationReport {
    let mut r = ValidationReport::default();
    let s = &spec.system;
    let w = &spec.weights;
    let (n, m1, m2, p1, p2) = (s.n(), s.m1(), s.m2(), s.p1(), s.p2());

    let positive = n > 0 && m1 > 0 && m2 > 0 && p1 > 0 && p2 > 0;
    r.push(
        "dimensions positive",
        Severity::Fatal,
        positive,
        format!("n={n} m1={m1} m2={m2} p1={p1} p2={p2}"),
    );
    let mut shapes_ok = positive;
    for (name, m, rows, cols) in [
        ("A", &s.a, n, n),
        ("B1", &s.b1, n, m1),
        ("B2", &s.b2, n, m2),
        ("C1", &s.c1, p1, n),
        ("C2", &s.c2, p2, n),
        ("Qw", &s.qw, n, n),
        ("Qv1", &s.qv1, p1, p1),
        ("Qv2", &s.qv2, p2, p2),
        ("sigma", &s.sigma, n, n),
        ("Q1", &w.q1, n, n),
        ("Q2", &w.q2, n, n),
        ("S1", &w.s1, m1, m1),
        ("S2", &w.s2, m1, m1),
        ("R1", &w.r1, m2, m2),
        ("R2", &w.r2, m2, m2),
        ("P1_term", &w.p1_term, n, n),
        ("Phi1_term", &w.phi1_term, n, n),
        ("P2_term", &w.p2_term, n, n),
        ("Phi2_term", &w.phi2_term, n, n),
    ] {
        shapes_ok &= shape_check(&mut r, name, m, rows, cols);
    }
    let mu_ok = s.mu.len() == n;
    r.push(
        "shape mu",
        Severity::Fatal,
        mu_ok,
        format!("expected length {n}, got {}", s.mu.len()),
    );
    if !(shapes_ok && mu_ok) {
        return r;
    }

    for (name, m) in [
        ("Qw", &s.qw),
        ("sigma", &s.sigma),
        ("Q1", &w.q1),
        ("Q2", &w.q2),
        ("S1", &w.s1),
        ("S2", &w.s2),
        ("R1", &w.r1),
        ("R2", &w.r2),
        ("P1_term", &w.p1_term),
        ("Phi1_term", &w.phi1_term),
        ("P2_term", &w.p2_term),
        ("Phi2_term", &w.phi2_term),
    ] {
        let sym = is_symmetric(m, 1e-12);
        let psd = is_psd(m);
        r.push(
            format!("PSD {name}"),
            Severity::Fatal,
            sym && psd,
            format!("symmetric={sym} min_eig={:.3e}", min_sym_eig(m)),
        );
    }
    for (name, m) in [("Qv1", &s.qv1), ("Qv2", &s.qv2)] {
        let sym = is_symmetric(m, 1e-12);
        let lo = min_sym_eig(m);
        let ok = sym && lo > 1e-10 * (1.0 + m.norm());
        r.push(
            format!("PD {name}"),
            Severity::Fatal,
            ok,
            format!("innovation covariance singular unless positive definite; min_eig={lo:.3e}"),
        );
    }

    let aug = augment(spec);
    let checks = [
        ("stabilizable (A,B)", pbh_controllable(&s.a, &aug.b, 1.0)),
        ("stabilizable (A,B2)", pbh_controllable(&s.a, &s.b2, 1.0)),
        (
            "detectable (A,Q1^1/2)",
            pbh_observable(&s.a, &psd_sqrt(&w.q1), 1.0),
        ),
        (
            "detectable (A,Q2^1/2)",
            pbh_observable(&s.a, &psd_sqrt(&w.q2), 1.0),
        ),
        ("observable (A,C1)", pbh_observable(&s.a, &s.c1, 0.0)),
        ("observable (A,C2)", pbh_observable(&s.a, &s.c2, 0.0)),
        ("observable (A,C)", pbh_observable(&s.a, &aug.c, 0.0)),
    ];
    for (name, ok) in checks {
        r.push(name, Severity::Warning, ok, "PBH rank test".into());
    }
    r
}

// ---------------------------------------------------------------------------
// Built-in instance

fn diag(v: &[f64]) -> Mat {
    Mat::from_diagonal(&Vector::from_row_slice(v))
}

/// The two-state, two-input-per-player example with horizon 50.
///
/// The first `R1`/`R2` pair of the published parameter list is read as the
/// measurement-noise covariances; the second as the cost weights.
pub fn paper_example() -> ProblemSpec {
    let i2 = Mat::identity(2, 2);
    let system = SystemModel {
        a: Mat::from_row_slice(2, 2, &[0.98, 0.05, 0.02, 0.96]),
        b1: diag(&[0.40, 0.30]),
        b2: diag(&[0.35, 0.40]),
        c1: Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        c2: i2.clone(),
        qw: &i2 * 0.06,
        qv1: diag(&[0.3, 0.3]),
        qv2: &i2 * 0.01,
        mu: Vector::zeros(2),
        sigma: &i2 * 0.1,
    };
    let weights = CostWeights {
        q1: &i2 * 2.0,
        q2: &i2 * 2.0,
        s1: i2.clone(),
        s2: i2.clone(),
        r1: &i2 * 2.0,
        r2: &i2 * 2.0,
        ..default_terminals(2)
    };
    ProblemSpec {
        system,
        weights,
        horizon: 50,
        info: InfoStructure::Asymmetric,
    }
}

/// Terminal defaults `P1=I, Phi1=0, P2=0, Phi2=I`; the stage weights are
/// left empty and must be overwritten.
pub fn default_terminals(n: usize) -> CostWeights {
    let e = Mat::zeros(0, 0);
    CostWeights {
        q1: e.clone(),
        q2: e.clone(),
        s1: e.clone(),
        s2: e.clone(),
        r1: e.clone(),
        r2: e,
        p1_term: Mat::identity(n, n),
        phi1_term: Mat::zeros(n, n),
        p2_term: Mat::zeros(n, n),
        phi2_term: Mat::identity(n, n),
    }
}

// ---------------------------------------------------------------------------
// Model file

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    #[serde(rename = "A")]
    a: Rows,
    #[serde(rename = "B1")]
    b1: Rows,
    #[serde(rename = "B2")]
    b2: Rows,
    #[serde(rename = "C1")]
    c1: Rows,
    #[serde(rename = "C2")]
    c2: Rows,
    #[serde(rename = "Qw")]
    qw: Rows,
    #[serde(rename = "Qv1")]
    qv1: Rows,
    #[serde(rename = "Qv2")]
    qv2: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<Vec<f64>>,
    sigma: Rows,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsDoc {
    #[serde(rename = "Q1")]
    q1: Rows,
    #[serde(rename = "Q2")]
    q2: Rows,
    #[serde(rename = "S1")]
    s1: Rows,
    #[serde(rename = "S2")]
    s2: Rows,
    #[serde(rename = "R1")]
    r1: Rows,
    #[serde(rename = "R2")]
    r2: Rows,
    #[serde(rename = "P1_term", default, skip_serializing_if = "Option::is_none")]
    p1_term: Option<Rows>,
    #[serde(rename = "Phi1_term", default, skip_serializing_if = "Option::is_none")]
    phi1_term: Option<Rows>,
    #[serde(rename = "P2_term", default, skip_serializing_if = "Option::is_none")]
    p2_term: Option<Rows>,
    #[serde(rename = "Phi2_term", default, skip_serializing_if = "Option::is_none")]
    phi2_term: Option<Rows>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    system: SystemDoc,
    weights: WeightsDoc,
    horizon: usize,
    #[serde(default)]
    info: InfoStructure,
}

fn matrix(path: &str, rows: &Rows, shape: Option<(usize, usize)>) -> Result<Mat> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if let Some(i) = rows.iter().position(|r| r.len() != nc) {
        return Err(GameError::Parse {
            path: path.to_string(),
            message: format!("ragged matrix: row {i} has {} entries, expected {nc}", rows[i].len()),
        });
    }
    if let Some((er, ec)) = shape {
        if (nr, nc) != (er, ec) {
            return Err(GameError::Parse {
                path: path.to_string(),
                message: format!("expected {er}x{ec} matrix, got {nr}x{nc}"),
            });
        }
    }
    Ok(Mat::from_fn(nr, nc, |i, j| rows[i][j]))
}

fn rows_of(m: &Mat) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl SpecDoc {
    fn into_spec(self) -> Result<ProblemSpec> {
        let s = self.system;
        let w = self.weights;
        let n = s.a.first().map_or(0, Vec::len);
        let a = matrix("system.A", &s.a, Some((n, n)))?;
        let b1 = matrix("system.B1", &s.b1, None)?;
        let b2 = matrix("system.B2", &s.b2, None)?;
        let c1 = matrix("system.C1", &s.c1, None)?;
        let c2 = matrix("system.C2", &s.c2, None)?;
        let (m1, m2, p1, p2) = (b1.ncols(), b2.ncols(), c1.nrows(), c2.nrows());
        let b1 = matrix("system.B1", &s.b1, Some((n, m1)))?;
        let b2 = matrix("system.B2", &s.b2, Some((n, m2)))?;
        let c1 = matrix("system.C1", &s.c1, Some((p1, n)))?;
        let c2 = matrix("system.C2", &s.c2, Some((p2, n)))?;
        let mu = match s.mu {
            None => Vector::zeros(n),
            Some(v) if v.len() == n => Vector::from_vec(v),
            Some(v) => {
                return Err(GameError::Parse {
                    path: "system.mu".into(),
                    message: format!("expected length {n}, got {}", v.len()),
                })
            }
        };
        let system = SystemModel {
            a,
            b1,
            b2,
            c1,
            c2,
            qw: matrix("system.Qw", &s.qw, Some((n, n)))?,
            qv1: matrix("system.Qv1", &s.qv1, Some((p1, p1)))?,
            qv2: matrix("system.Qv2", &s.qv2, Some((p2, p2)))?,
            mu,
            sigma: matrix("system.sigma", &s.sigma, Some((n, n)))?,
        };
        let defaults = default_terminals(n);
        let term = |path: &str, doc: &Option<Rows>, default: Mat| -> Result<Mat> {
            doc.as_ref()
                .map_or(Ok(default), |r| matrix(path, r, Some((n, n))))
        };
        let weights = CostWeights {
            q1: matrix("weights.Q1", &w.q1, Some((n, n)))?,
            q2: matrix("weights.Q2", &w.q2, Some((n, n)))?,
            s1: matrix("weights.S1", &w.s1, Some((m1, m1)))?,
            s2: matrix("weights.S2", &w.s2, Some((m1, m1)))?,
            r1: matrix("weights.R1", &w.r1, Some((m2, m2)))?,
            r2: matrix("weights.R2", &w.r2, Some((m2, m2)))?,
            p1_term: term("weights.P1_term", &w.p1_term, defaults.p1_term)?,
            phi1_term: term("weights.Phi1_term", &w.phi1_term, defaults.phi1_term)?,
            p2_term: term("weights.P2_term", &w.p2_term, defaults.p2_term)?,
            phi2_term: term("weights.Phi2_term", &w.phi2_term, defaults.phi2_term)?,
        };
        Ok(ProblemSpec {
            system,
            weights,
            horizon: self.horizon,
            info: self.info,
        })
    }

    fn from_spec(spec: &ProblemSpec) -> Self {
        let s = &spec.system;
        let w = &spec.weights;
        SpecDoc {
            system: SystemDoc {
                a: rows_of(&s.a),
                b1: rows_of(&s.b1),
                b2: rows_of(&s.b2),
                c1: rows_of(&s.c1),
                c2: rows_of(&s.c2),
                qw: rows_of(&s.qw),
                qv1: rows_of(&s.qv1),
                qv2: rows_of(&s.qv2),
                mu: Some(s.mu.iter().copied().collect()),
                sigma: rows_of(&s.sigma),
            },
            weights: WeightsDoc {
                q1: rows_of(&w.q1),
                q2: rows_of(&w.q2),
                s1: rows_of(&w.s1),
                s2: rows_of(&w.s2),
                r1: rows_of(&w.r1),
                r2: rows_of(&w.r2),
                p1_term: Some(rows_of(&w.p1_term)),
                phi1_term: Some(rows_of(&w.phi1_term)),
                p2_term: Some(rows_of(&w.p2_term)),
                phi2_term: Some(rows_of(&w.phi2_term)),
            },
            horizon: spec.horizon,
            info: spec.info,
        }
    }
}

/// Parses a JSON model document.
pub fn load_spec(text: &str) -> Result<ProblemSpec> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: SpecDoc = serde_path_to_error::deserialize(de).map_err(|e| GameError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    doc.into_spec()
}

pub fn load_spec_file(path: &std::path::Path) -> Result<ProblemSpec> {
    load_spec(&std::fs::read_to_string(path)?)
}

/// Serializes to the JSON model document accepted by [`load_spec`].
pub fn serialize_spec(spec: &ProblemSpec) -> String {
    serde_json::to_string_pretty(&SpecDoc::from_spec(spec)).expect("plain data serializes")
}
