//! Pipelines behind the `lqgame` subcommands. Each command returns a
//! [`CommandOutcome`]; the binary only prints it and exits with its code.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use lqgame::export::{self, VerifyRow};
use lqgame::filter::{covariance_gap, steady_covariances};
use lqgame::riccati::closed_loop_spectra;
use lqgame::{
    analytic_cost_asym, analytic_cost_sym, augment, backward, best_response_certificate, covariance_forward,
    forward_steady, gap_decomposition, load_spec_file, nash_profile, orthogonality_stats, paper_example,
    steady_profile, symmetric_profile, validate, ClosedLoop, GameError, Mat, ProblemSpec, RiccatiTrajectory,
    SteadyOptions, StrategyProfile,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    /// Files that were completely written.
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

impl CommandOutcome {
    fn failed(exit_code: i32, summary: String, artifacts: Vec<PathBuf>) -> Self {
        Self {
            exit_code,
            artifacts,
            summary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProfileChoice {
    #[default]
    Nash,
    Symmetric,
    Zero,
}

#[derive(Debug, Clone)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub horizon: Option<usize>,
    pub runs: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub profile: ProfileChoice,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            config: None,
            out: PathBuf::from("out"),
            horizon: None,
            runs: 10_000,
            seed: 0,
            tol: 1e-10,
            max_iter: 2000,
            profile: ProfileChoice::Nash,
        }
    }
}

/// Error plus the exit code it maps to; `body` carries any report
/// produced before the failure was detected.
struct Failure(i32, String, String);

impl From<GameError> for Failure {
    fn from(e: GameError) -> Self {
        let code = match &e {
            GameError::Dimension(_)
            | GameError::NotPsd { .. }
            | GameError::Parse { .. }
            | GameError::NotSteadyReady(_)
            | GameError::InnovationSingular { step: None, .. } => EXIT_VALIDATION,
            _ => EXIT_SOLVER,
        };
        Failure(code, e.to_string(), String::new())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure(EXIT_SOLVER, format!("i/o error: {e}"), String::new())
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a listed artifact is always complete.
struct Artifacts {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Artifacts {
    fn new(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> lqgame::Result<()>) -> Result<(), Failure> {
        let path = self.dir.join(name);
        let tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            f(&mut w)?;
            w.flush()?;
        }
        tmp.as_file().sync_all()?;
        tmp.persist(&path).map_err(|e| Failure(EXIT_SOLVER, format!("cannot write {}: {}", path.display(), e.error), String::new()))?;
        self.written.push(path);
        Ok(())
    }
}

fn load(opts: &Options, summary: &mut String) -> Result<ProblemSpec, Failure> {
    let mut spec = match &opts.config {
        Some(p) => load_spec_file(p).map_err(|e| Failure(EXIT_VALIDATION, e.to_string(), String::new()))?,
        None => paper_example(),
    };
    if let Some(n) = opts.horizon {
        spec.horizon = n;
    }
    let report = validate(&spec);
    for w in report.warnings() {
        let _ = writeln!(summary, "warning: {}: {}", w.name, w.detail);
    }
    report.ensure_valid()?;
    Ok(spec)
}

fn is_builtin_example(spec: &ProblemSpec) -> bool {
    *spec == paper_example()
}

fn select_profile(choice: ProfileChoice, rt: &RiccatiTrajectory, spec: &ProblemSpec) -> StrategyProfile {
    match choice {
        ProfileChoice::Nash => nash_profile(rt),
        ProfileChoice::Symmetric => symmetric_profile(rt),
        ProfileChoice::Zero => {
            let s = &spec.system;
            StrategyProfile::zero(s.n(), s.m1(), s.m2(), spec.horizon)
        }
    }
}

fn finish(result: Result<String, Failure>, summary: String, arts: Option<Artifacts>) -> CommandOutcome {
    let artifacts = arts.map(|a| a.written).unwrap_or_default();
    match result {
        Ok(body) => CommandOutcome {
            exit_code: EXIT_OK,
            artifacts,
            summary: summary + &body,
        },
        Err(Failure(code, msg, body)) => CommandOutcome::failed(code, format!("{summary}{body}error: {msg}\n"), artifacts),
    }
}

/// Finite-horizon pipeline: Riccati, covariances, gains and analytic costs.
pub fn cmd_solve(opts: &Options) -> CommandOutcome {
    let mut summary = String::new();
    let mut arts = None;
    let result = (|| {
        let spec = load(opts, &mut summary)?;
        let aug = augment(&spec);
        let rt = backward(&aug, &spec.weights, spec.horizon)?;
        let cov = covariance_forward(&aug, &spec.system.sigma, &rt.k2)?;
        let profile = select_profile(opts.profile, &rt, &spec);
        let asym = analytic_cost_asym(&spec, &rt, &cov)?;
        let sym = analytic_cost_sym(&spec, &rt, &cov)?;
        let a = arts.insert(Artifacts::new(&opts.out)?);
        a.write("riccati.csv", |w| export::write_riccati(w, &rt))?;
        a.write("covariances.csv", |w| export::write_covariances(w, &cov))?;
        a.write("gains.csv", |w| export::write_gains(w, &profile))?;
        let mut rows = export::cost_rows("", &asym);
        rows.extend(export::cost_rows("sym_", &sym));
        a.write("costs.csv", |w| export::write_name_values(w, &rows))?;
        Ok(format!(
            "horizon {}\nasymmetric J1 = {:.6}, J2 = {:.6}\nsymmetric  J1 = {:.6}, J2 = {:.6} (J2 by index swap)\n",
            spec.horizon, asym.j1, asym.j2, sym.j1, sym.j2
        ))
    })();
    finish(result, summary, arts)
}

/// Stationary gains and covariances.
pub fn cmd_steady(opts: &Options) -> CommandOutcome {
    let mut summary = String::new();
    let mut arts = None;
    let result = (|| {
        let spec = load(opts, &mut summary)?;
        validate(&spec).ensure_steady_ready()?;
        let aug = augment(&spec);
        let sr = forward_steady(
            &aug,
            &spec.weights,
            SteadyOptions {
                tol: opts.tol,
                max_iter: opts.max_iter,
                ..SteadyOptions::default()
            },
        )?;
        let sc = steady_covariances(&aug, &sr.k2, opts.tol, opts.max_iter.max(10_000))?;
        let spectra = closed_loop_spectra(&sr, &aug);
        let profile = steady_profile(&sr, spec.horizon);
        debug_assert_eq!(profile.k1[0], sr.k1);
        let extra = vec![
            ("Sigma1".to_string(), sc.sigma1.clone()),
            ("Sigma2".to_string(), sc.sigma2.clone()),
            ("G1".to_string(), sc.g1.clone()),
            ("G2".to_string(), sc.g2.clone()),
        ];
        let a = arts.insert(Artifacts::new(&opts.out)?);
        a.write("steady.csv", |w| export::write_steady(w, &sr, &extra, spectra))?;
        Ok(format!(
            "converged in {} iterations (residual {:.3e})\nspectral radii: A+BK1 {:.6}, A+B2K2 {:.6}\n",
            sr.iterations, sr.residual, spectra.0, spectra.1
        ))
    })();
    finish(result, summary, arts)
}

/// Analytic, exact and Monte Carlo costs under both information structures.
pub fn cmd_compare(opts: &Options) -> CommandOutcome {
    let mut summary = String::new();
    let mut arts = None;
    let result = (|| {
        let spec = load(opts, &mut summary)?;
        let aug = augment(&spec);
        let rt = backward(&aug, &spec.weights, spec.horizon)?;
        let cov = covariance_forward(&aug, &spec.system.sigma, &rt.k2)?;
        let asym = analytic_cost_asym(&spec, &rt, &cov)?;
        let sym = analytic_cost_sym(&spec, &rt, &cov)?;
        let (np, sp) = (nash_profile(&rt), symmetric_profile(&rt));
        let (cl_a, cl_s) = (ClosedLoop::new(&spec, &np)?, ClosedLoop::new(&spec, &sp)?);
        let mc = (opts.runs >= 2).then(|| {
            (
                cl_s.estimate_costs(&sp, opts.runs, opts.seed),
                cl_a.estimate_costs(&np, opts.runs, opts.seed),
            )
        });
        let reference = is_builtin_example(&spec);
        let rows = export::table1_rows(&sym, &asym, cl_s.moment_costs(&sp), cl_a.moment_costs(&np), mc, reference);
        let gap = gap_decomposition(&spec, &rt, &cov)?;
        let a = arts.insert(Artifacts::new(&opts.out)?);
        a.write("table1.csv", |w| export::write_table1(w, &rows))?;
        a.write("gap.csv", |w| export::write_name_values(w, &export::gap_rows(&gap)))?;

        let mut body = String::from("cost      analytic      exact         mc_mean       mc_stderr     reference  delta\n");
        for r in &rows {
            let _ = writeln!(
                body,
                "{:<9} {:<13.6} {:<13.6} {:<13} {:<13} {:<10} {}",
                r.cost,
                r.analytic,
                r.exact,
                r.mc.map(|m| format!("{:.6}", m.0)).unwrap_or_default(),
                r.mc.map(|m| format!("{:.6}", m.1)).unwrap_or_default(),
                r.reference.map(|p| p.to_string()).unwrap_or_default(),
                r.reference.map(|p| format!("{:+.4}", r.analytic - p)).unwrap_or_default(),
            );
        }
        let _ = writeln!(body, "gap: sum {:.6}, direct {:.6}, residual {:.6}", gap.sum, gap.direct_difference, gap.residual);
        let tol = 1e-6 * (1.0 + asym.j1.abs());
        if asym.j1 - sym.j1 < -tol {
            return Err(Failure(
                EXIT_VERIFICATION,
                format!("ordering violated: asymmetric J1 {:.6} < symmetric J1 {:.6}", asym.j1, sym.j1),
                body,
            ));
        }
        Ok(body)
    })();
    finish(result, summary, arts)
}

/// Property suite: covariance monotonicity, orthogonality, Nash
/// certificate and closed-form/exact agreement.
pub fn cmd_verify(opts: &Options) -> CommandOutcome {
    let mut summary = String::new();
    let mut arts = None;
    let result = (|| {
        let spec = load(opts, &mut summary)?;
        let aug = augment(&spec);
        let rt = backward(&aug, &spec.weights, spec.horizon)?;
        let cov = covariance_forward(&aug, &spec.system.sigma, &rt.k2)?;
        let profile = select_profile(opts.profile, &rt, &spec);
        let mut rows = Vec::new();

        let min_eig = covariance_gap(&cov).iter().map(|r| r.min_eig).fold(f64::INFINITY, f64::min);
        rows.push(VerifyRow {
            check: "covariance_monotonicity_min_eig".into(),
            value: min_eig,
            threshold: -1e-8,
            pass: min_eig >= -1e-8,
        });

        let runs = opts.runs.max(100);
        let orth = orthogonality_stats(&spec, &profile, runs, opts.seed)?;
        for (name, (v, ok)) in lqgame::OrthogonalityStats::NAMES.iter().zip(orth.max.iter().zip(orth.passed())) {
            rows.push(VerifyRow {
                check: format!("orthogonality_{name}"),
                value: *v,
                threshold: orth.threshold,
                pass: ok,
            });
        }

        let cert = best_response_certificate(&spec, &profile, &[1e-2], opts.runs.max(2), opts.seed)?;
        let worst = cert
            .deviations
            .iter()
            .map(|d| d.delta_j / d.stderr.max(f64::MIN_POSITIVE))
            .fold(f64::INFINITY, f64::min);
        rows.push(VerifyRow {
            check: "nash_certificate_min_dj_over_stderr".into(),
            value: worst,
            threshold: -3.0,
            pass: cert.overall_pass,
        });

        let asym = analytic_cost_asym(&spec, &rt, &cov)?;
        let sym = analytic_cost_sym(&spec, &rt, &cov)?;
        let (np, sp) = (nash_profile(&rt), symmetric_profile(&rt));
        let ea = ClosedLoop::new(&spec, &np)?.moment_costs(&np);
        let es = ClosedLoop::new(&spec, &sp)?.moment_costs(&sp);
        for (name, analytic, exact) in [
            ("oracle_asym_J1", asym.j1, ea.0),
            ("oracle_asym_J2", asym.j2, ea.1),
            ("oracle_sym_J1", sym.j1, es.0),
            ("oracle_sym_J2", sym.j2, es.1),
        ] {
            let rel = (analytic - exact).abs() / exact.abs().max(f64::MIN_POSITIVE);
            let pass = (analytic - exact).abs() <= 1e-6 * exact.abs() || analytic == exact;
            rows.push(VerifyRow {
                check: name.into(),
                value: rel,
                threshold: 1e-6,
                pass,
            });
        }

        let a = arts.insert(Artifacts::new(&opts.out)?);
        a.write("verify.csv", |w| export::write_verify(w, &rows))?;
        a.write("certificate.csv", |w| export::write_certificate(w, &cert))?;

        let mut body = String::new();
        for r in &rows {
            let _ = writeln!(
                body,
                "{} {:<40} value {:.6e} threshold {:.3e}",
                if r.pass { "PASS" } else { "FAIL" },
                r.check,
                r.value,
                r.threshold
            );
        }
        if rows.iter().all(|r| r.pass) {
            Ok(body)
        } else {
            Err(Failure(EXIT_VERIFICATION, "one or more checks failed".into(), body))
        }
    })();
    finish(result, summary, arts)
}

/// Plottable series: Riccati matrices, gains, one seeded trajectory and
/// the estimator covariance traces.
pub fn cmd_figures(opts: &Options) -> CommandOutcome {
    let mut summary = String::new();
    let mut arts = None;
    let result = (|| {
        let spec = load(opts, &mut summary)?;
        let aug = augment(&spec);
        let rt = backward(&aug, &spec.weights, spec.horizon)?;
        let cov = covariance_forward(&aug, &spec.system.sigma, &rt.k2)?;
        let profile = select_profile(opts.profile, &rt, &spec);
        let traj = ClosedLoop::new(&spec, &profile)?.simulate(&profile, opts.seed, 0);
        let a = arts.insert(Artifacts::new(&opts.out)?);
        a.write("fig_riccati1.csv", |w| export::write_wide(w, &[("P1", &rt.p1), ("Phi1", &rt.phi1)]))?;
        a.write("fig_riccati2.csv", |w| export::write_wide(w, &[("P2", &rt.p2), ("Phi2", &rt.phi2)]))?;
        a.write("fig_gains.csv", |w| {
            export::write_wide(w, &[("K1", &profile.k1 as &[Mat]), ("K2", &profile.k2)])
        })?;
        a.write("fig_trajectory.csv", |w| export::write_trajectory(w, &traj))?;
        a.write("fig_sigma_trace.csv", |w| export::write_sigma_trace(w, &cov))?;
        Ok(format!("wrote {} figure series\n", 5))
    })();
    finish(result, summary, arts)
}
