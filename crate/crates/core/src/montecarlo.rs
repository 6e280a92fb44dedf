//! Closed-loop simulation, exact second-moment propagation and empirical
//! checks of the equilibrium.
//!
//! Randomness: run `r` under seed `s` draws from `ChaCha8Rng` seeded with
//! `s` on stream `r`, in the fixed order `x0`, then `w_k, v1_k, v2_k` for
//! `k = 0..=N`. A run's noise therefore depends only on `(s, r, k)`, so two
//! profiles simulated with the same seed see common random numbers and
//! parallel execution cannot change any result.
//!
//! Estimator 1 propagates with player 1's actual action and with its
//! *nominal* belief `[0 I] K1 x̂¹` about player 2's common action, taken
//! from the profile the [`ClosedLoop`] was built for. A unilateral
//! deviation by player 2 is thus invisible to estimator 1, as it should be.
//! Under symmetric feedback estimator 1 uses both actual actions.

use std::ops::AddAssign;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{apply_strategy, StrategyProfile};
use crate::error::{GameError, Result};
use crate::filter::{covariance_forward, filter_step, CovarianceSchedule, FilterState};
use crate::linalg::{block_diag, psd_factor, Mat, Vector};
use crate::model::{augment, AugmentedModel, ProblemSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `k = 0..=N+1`
    pub x: Vec<Vector>,
    /// `k = 0..=N`
    pub y1: Vec<Vector>,
    pub y2: Vec<Vector>,
    pub u1: Vec<Vector>,
    pub u2: Vec<Vector>,
    /// `k = 0..=N+1`
    pub xhat1_pred: Vec<Vector>,
    pub xhat2_pred: Vec<Vector>,
    pub d: Vec<Vector>,
    pub e1: Vec<Vector>,
    pub e2: Vec<Vector>,
    pub realized_cost1: f64,
    pub realized_cost2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostEstimate {
    pub mean1: f64,
    pub mean2: f64,
    pub stderr1: f64,
    pub stderr2: f64,
    pub runs: usize,
    pub seed: u64,
}

fn mean_stderr(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = xs.clone().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    let mean = sum / n as f64;
    let ss: f64 = xs.map(|x| (x - mean).powi(2)).sum();
    let var = if n > 1 { ss / (n - 1) as f64 } else { f64::NAN };
    (mean, (var / n as f64).sqrt())
}

impl CostEstimate {
    fn from_runs(costs: &[[f64; 2]], seed: u64) -> Self {
        let (mean1, stderr1) = mean_stderr(costs.iter().map(|c| c[0]));
        let (mean2, stderr2) = mean_stderr(costs.iter().map(|c| c[1]));
        Self {
            mean1,
            mean2,
            stderr1,
            stderr2,
            runs: costs.len(),
            seed,
        }
    }
}

/// Everything a run needs besides the gains: the plant, the estimator gain
/// schedule, estimator 1's nominal belief gains and noise factors.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    spec: ProblemSpec,
    aug: AugmentedModel,
    sched: CovarianceSchedule,
    belief: Vec<Mat>,
    symmetric: bool,
    l_x0: Mat,
    l_w: Mat,
    l_v1: Mat,
    l_v2: Mat,
}

/// What a single run hands back to its caller at each `k = 0..=N+1`.
struct Snapshot<'a> {
    x: &'a Vector,
    xhat1: &'a Vector,
    xhat2: &'a Vector,
}

impl ClosedLoop {
    /// Estimator gains come from the covariance recursion driven by the
    /// nominal profile's private gain.
    pub fn new(spec: &ProblemSpec, nominal: &StrategyProfile) -> Result<Self> {
        if nominal.horizon() != spec.horizon {
            return Err(GameError::HorizonMismatch(format!(
                "profile horizon {} vs spec horizon {}",
                nominal.horizon(),
                spec.horizon
            )));
        }
        let aug = augment(spec);
        let sched = covariance_forward(&aug, &spec.system.sigma, &nominal.k2)?;
        let s = &spec.system;
        Ok(Self {
            belief: (0..=spec.horizon).map(|k| nominal.player2_common_gain(k)).collect(),
            symmetric: nominal.feeds_back_on_estimator2(),
            l_x0: psd_factor(&s.sigma),
            l_w: psd_factor(&s.qw),
            l_v1: psd_factor(&s.qv1),
            l_v2: psd_factor(&s.qv2),
            spec: spec.clone(),
            aug,
            sched,
        })
    }

    pub fn schedule(&self) -> &CovarianceSchedule {
        &self.sched
    }

    fn check(&self, profile: &StrategyProfile) {
        assert_eq!(profile.horizon(), self.spec.horizon, "profile horizon");
        assert_eq!(profile.feeds_back_on_estimator2(), self.symmetric, "profile structure");
    }

    fn draw(rng: &mut ChaCha8Rng, factor: &Mat) -> Vector {
        let z = Vector::from_fn(factor.ncols(), |_, _| rng.sample(StandardNormal));
        factor * z
    }

    /// One run; `observe` sees the state and both predicted estimates at
    /// every `k = 0..=N+1`, `record` sees the measurements and actions.
    fn run(
        &self,
        profile: &StrategyProfile,
        seed: u64,
        run: u64,
        mut observe: impl FnMut(usize, Snapshot<'_>),
        mut record: impl FnMut(&Vector, &Vector, &Vector, &Vector),
    ) -> [f64; 2] {
        let s = &self.spec.system;
        let w = &self.spec.weights;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run);

        let mut x = &s.mu + Self::draw(&mut rng, &self.l_x0);
        let mut state = FilterState::initial(&s.mu);
        let mut cost = [0.0; 2];
        for k in 0..=self.spec.horizon {
            observe(
                k,
                Snapshot {
                    x: &x,
                    xhat1: &state.xhat1_pred,
                    xhat2: &state.xhat2_pred,
                },
            );
            let act = apply_strategy(profile, k, &state.xhat1_pred, &state.xhat2_pred).expect("k within horizon");
            let wk = Self::draw(&mut rng, &self.l_w);
            let v1 = Self::draw(&mut rng, &self.l_v1);
            let v2 = Self::draw(&mut rng, &self.l_v2);
            let y1 = &s.c1 * &x + v1;
            let y2 = &s.c2 * &x + v2;

            let xqx = [x.dot(&(&w.q1 * &x)), x.dot(&(&w.q2 * &x))];
            cost[0] += xqx[0] + act.u1.dot(&(&w.s1 * &act.u1)) + act.u2.dot(&(&w.r1 * &act.u2));
            cost[1] += xqx[1] + act.u1.dot(&(&w.s2 * &act.u1)) + act.u2.dot(&(&w.r2 * &act.u2));

            let belief = if self.symmetric {
                act.u2.clone()
            } else {
                &self.belief[k] * &state.xhat1_pred
            };
            let uhat1 = Vector::from_iterator(act.u1.len() + belief.len(), act.u1.iter().chain(belief.iter()).copied());
            let utilde = &act.u2 - &belief;
            let next = filter_step(
                &state,
                &y1,
                &y2,
                &uhat1,
                &utilde,
                &self.sched.g1[k],
                &self.sched.g2[k],
                &self.aug,
            );
            record(&y1, &y2, &act.u1, &act.u2);
            x = &s.a * &x + &s.b1 * &act.u1 + &s.b2 * &act.u2 + wk;
            state = next;
        }
        let k_end = self.spec.horizon + 1;
        observe(
            k_end,
            Snapshot {
                x: &x,
                xhat1: &state.xhat1_pred,
                xhat2: &state.xhat2_pred,
            },
        );
        cost[0] += x.dot(&(w.terminal_state_weight1() * &x));
        cost[1] += x.dot(&(w.terminal_state_weight2() * &x));
        cost
    }

    pub fn simulate(&self, profile: &StrategyProfile, seed: u64, run: u64) -> Trajectory {
        self.check(profile);
        let len = self.spec.horizon + 2;
        let mut t = Trajectory {
            x: Vec::with_capacity(len),
            y1: Vec::with_capacity(len),
            y2: Vec::with_capacity(len),
            u1: Vec::with_capacity(len),
            u2: Vec::with_capacity(len),
            xhat1_pred: Vec::with_capacity(len),
            xhat2_pred: Vec::with_capacity(len),
            d: Vec::with_capacity(len),
            e1: Vec::with_capacity(len),
            e2: Vec::with_capacity(len),
            realized_cost1: 0.0,
            realized_cost2: 0.0,
        };
        let mut rec = Vec::with_capacity(len);
        let cost = self.run(
            profile,
            seed,
            run,
            |_, snap| {
                t.x.push(snap.x.clone());
                t.xhat1_pred.push(snap.xhat1.clone());
                t.xhat2_pred.push(snap.xhat2.clone());
                t.d.push(snap.xhat2 - snap.xhat1);
                t.e1.push(snap.x - snap.xhat1);
                t.e2.push(snap.x - snap.xhat2);
            },
            |y1, y2, u1, u2| rec.push((y1.clone(), y2.clone(), u1.clone(), u2.clone())),
        );
        for (y1, y2, u1, u2) in rec {
            t.y1.push(y1);
            t.y2.push(y2);
            t.u1.push(u1);
            t.u2.push(u2);
        }
        t.realized_cost1 = cost[0];
        t.realized_cost2 = cost[1];
        t
    }

    /// Realized costs of runs `0..runs`, in run order.
    pub fn run_costs(&self, profile: &StrategyProfile, runs: usize, seed: u64) -> Vec<[f64; 2]> {
        self.check(profile);
        (0..runs as u64)
            .into_par_iter()
            .map(|r| self.run(profile, seed, r, |_, _| {}, |_, _, _, _| {}))
            .collect()
    }

    pub fn estimate_costs(&self, profile: &StrategyProfile, runs: usize, seed: u64) -> CostEstimate {
        assert!(runs >= 2, "need at least two runs");
        CostEstimate::from_runs(&self.run_costs(profile, runs, seed), seed)
    }

    /// Closed-loop map `z' = F z + E ξ` of `z = (x, x̂¹, x̂²)` with
    /// `ξ = (w, v1, v2)`, and the stage weights of both players.
    fn linear_step(&self, profile: &StrategyProfile, k: usize) -> (Mat, Mat, [Mat; 2]) {
        let s = &self.spec.system;
        let w = &self.spec.weights;
        let (n, m1, m2) = (s.n(), s.m1(), s.m2());
        let (p1, p2) = (s.p1(), s.p2());
        let mut u1 = Mat::zeros(m1, 3 * n);
        let mut u2 = Mat::zeros(m2, 3 * n);
        let mut ub = Mat::zeros(m2, 3 * n);
        let ka = profile.player1_gain(k);
        let kb = profile.player2_common_gain(k);
        if self.symmetric {
            u1.view_mut((0, 2 * n), (m1, n)).copy_from(&ka);
            u2.view_mut((0, 2 * n), (m2, n)).copy_from(&kb);
            ub.copy_from(&u2);
        } else {
            let k2 = &profile.k2[k];
            u1.view_mut((0, n), (m1, n)).copy_from(&ka);
            u2.view_mut((0, n), (m2, n)).copy_from(&(&kb - k2));
            u2.view_mut((0, 2 * n), (m2, n)).copy_from(k2);
            ub.view_mut((0, n), (m2, n)).copy_from(&self.belief[k]);
        }
        let mut sel_x = Mat::zeros(n, 3 * n);
        sel_x.view_mut((0, 0), (n, n)).copy_from(&Mat::identity(n, n));

        let a = &s.a;
        let ag1 = a * &self.sched.g1[k];
        let ag2 = a * &self.sched.g2[k];
        let common = &s.b1 * &u1;
        let mut f = Mat::zeros(3 * n, 3 * n);
        let mut e = Mat::zeros(3 * n, n + p1 + p2);

        let mut rows = f.rows_mut(0, n);
        rows += &common + &s.b2 * &u2;
        f.view_mut((0, 0), (n, n)).add_assign(a);
        e.view_mut((0, 0), (n, n)).copy_from(&Mat::identity(n, n));

        let mut rows = f.rows_mut(n, n);
        rows += &common + &s.b2 * &ub;
        f.view_mut((n, 0), (n, n)).add_assign(&(&ag1 * &s.c1));
        f.view_mut((n, n), (n, n)).add_assign(&(a - &ag1 * &s.c1));
        e.view_mut((n, n), (n, p1)).copy_from(&ag1);

        let mut rows = f.rows_mut(2 * n, n);
        rows += &common + &s.b2 * &u2;
        f.view_mut((2 * n, 0), (n, n)).add_assign(&(&ag2 * &self.aug.c));
        f.view_mut((2 * n, 2 * n), (n, n)).add_assign(&(a - &ag2 * &self.aug.c));
        e.view_mut((2 * n, n), (n, p1 + p2)).copy_from(&ag2);

        let xt = sel_x.transpose();
        let stage = |q: &Mat, sw: &Mat, rw: &Mat| &xt * q * &sel_x + u1.transpose() * sw * &u1 + u2.transpose() * rw * &u2;
        let weights = [stage(&w.q1, &w.s1, &w.r1), stage(&w.q2, &w.s2, &w.r2)];
        (f, e, weights)
    }

    fn noise_cov(&self) -> Mat {
        let s = &self.spec.system;
        block_diag(&s.qw, &block_diag(&s.qv1, &s.qv2))
    }

    fn terminal_weights(&self) -> [Mat; 2] {
        let n = self.spec.system.n();
        let w = &self.spec.weights;
        let embed = |t: &Mat| {
            let mut m = Mat::zeros(3 * n, 3 * n);
            m.view_mut((0, 0), (n, n)).copy_from(t);
            m
        };
        [embed(w.terminal_state_weight1()), embed(w.terminal_state_weight2())]
    }

    fn initial_moment(&self) -> Mat {
        let s = &self.spec.system;
        let n = s.n();
        let mz = Vector::from_iterator(3 * n, s.mu.iter().chain(s.mu.iter()).chain(s.mu.iter()).copied());
        let mut m = &mz * mz.transpose();
        m.view_mut((0, 0), (n, n)).add_assign(&s.sigma);
        m
    }

    /// Exact `E[z_k z_kᵀ]`, `k = 0..=N+1`.
    pub fn second_moments(&self, profile: &StrategyProfile) -> Vec<Mat> {
        self.check(profile);
        let qn = self.noise_cov();
        let mut out = Vec::with_capacity(self.spec.horizon + 2);
        out.push(self.initial_moment());
        for k in 0..=self.spec.horizon {
            let (f, e, _) = self.linear_step(profile, k);
            let m = out.last().unwrap();
            out.push(&f * m * f.transpose() + &e * &qn * e.transpose());
        }
        out
    }

    /// Both expected costs from forward moment propagation.
    pub fn moment_costs(&self, profile: &StrategyProfile) -> (f64, f64) {
        let moments = self.second_moments(profile);
        let mut j = [0.0; 2];
        for (k, m) in moments.iter().enumerate().take(self.spec.horizon + 1) {
            let (_, _, w) = self.linear_step(profile, k);
            for i in 0..2 {
                j[i] += (&w[i] * m).trace();
            }
        }
        let t = self.terminal_weights();
        let last = moments.last().unwrap();
        (j[0] + (&t[0] * last).trace(), j[1] + (&t[1] * last).trace())
    }

    /// Both expected costs from the backward value recursion
    /// `V_k = W_k + Fᵀ V_{k+1} F`; an evaluation order independent of
    /// [`Self::moment_costs`].
    pub fn adjoint_costs(&self, profile: &StrategyProfile) -> (f64, f64) {
        self.check(profile);
        let qn = self.noise_cov();
        let mut v = self.terminal_weights();
        let mut noise = [0.0; 2];
        for k in (0..=self.spec.horizon).rev() {
            let (f, e, w) = self.linear_step(profile, k);
            for i in 0..2 {
                noise[i] += (e.transpose() * &v[i] * &e * &qn).trace();
                v[i] = &w[i] + f.transpose() * &v[i] * &f;
            }
        }
        let m0 = self.initial_moment();
        ((&v[0] * &m0).trace() + noise[0], (&v[1] * &m0).trace() + noise[1])
    }

    /// Exact normalized cross-moments `|E[a_i b_j]| / sqrt(E[a_i²] E[b_j²])`,
    /// maximized over entries, for the pairs `(x̂¹, e²)`, `(d, e²)`,
    /// `(x̂¹, d)` at each `k`.
    pub fn population_orthogonality(&self, profile: &StrategyProfile) -> Vec<[f64; 3]> {
        let n = self.spec.system.n();
        let eye = Mat::identity(n, n);
        let mut xh1 = Mat::zeros(n, 3 * n);
        xh1.view_mut((0, n), (n, n)).copy_from(&eye);
        let mut e2 = Mat::zeros(n, 3 * n);
        e2.view_mut((0, 0), (n, n)).copy_from(&eye);
        e2.view_mut((0, 2 * n), (n, n)).copy_from(&(-&eye));
        let mut d = Mat::zeros(n, 3 * n);
        d.view_mut((0, 2 * n), (n, n)).copy_from(&eye);
        d.view_mut((0, n), (n, n)).copy_from(&(-&eye));
        self.second_moments(profile)
            .iter()
            .map(|m| {
                let norm = |a: &Mat, b: &Mat| {
                    let cross = a * m * b.transpose();
                    let va = (a * m * a.transpose()).diagonal();
                    let vb = (b * m * b.transpose()).diagonal();
                    normalized_max(&cross, &va, &vb)
                };
                [norm(&xh1, &e2), norm(&d, &e2), norm(&xh1, &d)]
            })
            .collect()
    }
}

fn normalized_max(cross: &Mat, va: &Vector, vb: &Vector) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..cross.nrows() {
        for j in 0..cross.ncols() {
            let scale = (va[i] * vb[j]).sqrt();
            if scale > 0.0 {
                best = best.max(cross[(i, j)].abs() / scale);
            }
        }
    }
    best
}

/// Single seeded run (run index 0).
pub fn simulate(spec: &ProblemSpec, profile: &StrategyProfile, seed: u64) -> Result<Trajectory> {
    Ok(ClosedLoop::new(spec, profile)?.simulate(profile, seed, 0))
}

pub fn estimate_costs(spec: &ProblemSpec, profile: &StrategyProfile, runs: usize, seed: u64) -> Result<CostEstimate> {
    Ok(ClosedLoop::new(spec, profile)?.estimate_costs(profile, runs, seed))
}

/// Exact expected costs `(J1, J2)` of a linear profile.
pub fn moment_oracle(spec: &ProblemSpec, profile: &StrategyProfile) -> Result<(f64, f64)> {
    Ok(ClosedLoop::new(spec, profile)?.moment_costs(profile))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthogonalityStats {
    /// Normalized max `|moment|` for `(x̂¹, e²)`, `(d, e²)`, `(x̂¹, d)`,
    /// indexed `k = 0..=N+1`.
    pub per_k: Vec<[f64; 3]>,
    pub max: [f64; 3],
    /// `5 / sqrt(M)`
    pub threshold: f64,
    pub runs: usize,
}

impl OrthogonalityStats {
    pub const NAMES: [&'static str; 3] = ["xhat1_e2", "d_e2", "xhat1_d"];

    pub fn passed(&self) -> [bool; 3] {
        self.max.map(|m| m <= self.threshold)
    }
}

/// Sample second moments over `runs` runs, normalized entrywise by the
/// root-mean-square of each factor.
pub fn orthogonality_stats(spec: &ProblemSpec, profile: &StrategyProfile, runs: usize, seed: u64) -> Result<OrthogonalityStats> {
    assert!(runs >= 2, "need at least two runs");
    let cl = ClosedLoop::new(spec, profile)?;
    cl.check(profile);
    let len = spec.horizon + 2;
    let n = spec.system.n();
    // (x̂¹, d, e²) per k for every run, reduced in run order below.
    let samples: Vec<Vec<[Vector; 3]>> = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let mut v = Vec::with_capacity(len);
            cl.run(
                profile,
                seed,
                r,
                |_, s| v.push([s.xhat1.clone(), s.xhat2 - s.xhat1, s.x - s.xhat2]),
                |_, _, _, _| {},
            );
            v
        })
        .collect();

    let pairs = [(0, 2), (1, 2), (0, 1)];
    let mut per_k = Vec::with_capacity(len);
    for k in 0..len {
        let mut cross = [Mat::zeros(n, n), Mat::zeros(n, n), Mat::zeros(n, n)];
        let mut sq = [Vector::zeros(n), Vector::zeros(n), Vector::zeros(n)];
        for run in &samples {
            let f = &run[k];
            for (c, &(a, b)) in cross.iter_mut().zip(&pairs) {
                c.ger(1.0, &f[a], &f[b], 1.0);
            }
            for (s, v) in sq.iter_mut().zip(f) {
                *s += v.component_mul(v);
            }
        }
        let mut row = [0.0; 3];
        for (i, &(a, b)) in pairs.iter().enumerate() {
            row[i] = normalized_max(&cross[i], &sq[a], &sq[b]);
        }
        per_k.push(row);
    }
    let max = per_k.iter().fold([0.0f64; 3], |acc, r| [acc[0].max(r[0]), acc[1].max(r[1]), acc[2].max(r[2])]);
    Ok(OrthogonalityStats {
        per_k,
        max,
        threshold: 5.0 / (runs as f64).sqrt(),
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    pub player: u8,
    pub direction: String,
    pub epsilon: f64,
    pub delta_j: f64,
    pub stderr: f64,
    pub pass: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashCertificate {
    pub baseline: CostEstimate,
    pub deviations: Vec<Deviation>,
    pub overall_pass: bool,
}

/// A gain perturbation applied identically at every `k`.
struct Perturbation {
    player: u8,
    label: String,
    /// Added to `K1` (only the player's own rows are nonzero).
    dk1: Mat,
    /// Added to `K2` (player 2 only).
    dk2: Mat,
}

fn perturbations(profile: &StrategyProfile, eps: f64, rng: &mut ChaCha8Rng) -> Vec<Perturbation> {
    let (n, m1, m2) = (profile.n(), profile.m1, profile.m2());
    let m = m1 + m2;
    let mut out = Vec::new();
    let zero_k1 = Mat::zeros(m, n);
    let zero_k2 = Mat::zeros(m2, n);
    for sign in [1.0, -1.0] {
        let sgn = if sign > 0.0 { '+' } else { '-' };
        for i in 0..m1 {
            for j in 0..n {
                let mut dk1 = zero_k1.clone();
                dk1[(i, j)] = sign * eps;
                out.push(Perturbation {
                    player: 1,
                    label: format!("K1[{i},{j}]{sgn}"),
                    dk1,
                    dk2: zero_k2.clone(),
                });
            }
        }
        for i in 0..m2 {
            for j in 0..n {
                let mut dk1 = zero_k1.clone();
                dk1[(m1 + i, j)] = sign * eps;
                out.push(Perturbation {
                    player: 2,
                    label: format!("K1[{},{j}]{sgn}", m1 + i),
                    dk1,
                    dk2: zero_k2.clone(),
                });
                let mut dk2 = zero_k2.clone();
                dk2[(i, j)] = sign * eps;
                out.push(Perturbation {
                    player: 2,
                    label: format!("K2[{i},{j}]{sgn}"),
                    dk1: zero_k1.clone(),
                    dk2,
                });
            }
        }
    }
    // One random unit-Frobenius direction per player, applied with both signs.
    let gauss = |rng: &mut ChaCha8Rng, r: usize, c: usize| Mat::from_fn(r, c, |_, _| rng.sample(StandardNormal));
    let mut d1 = zero_k1.clone();
    d1.rows_mut(0, m1).copy_from(&gauss(rng, m1, n));
    let norm1 = d1.norm();
    let mut d2c = zero_k1.clone();
    d2c.rows_mut(m1, m2).copy_from(&gauss(rng, m2, n));
    let d2p = gauss(rng, m2, n);
    let norm2 = (d2c.norm_squared() + d2p.norm_squared()).sqrt();
    for sign in [1.0, -1.0] {
        let sgn = if sign > 0.0 { '+' } else { '-' };
        out.push(Perturbation {
            player: 1,
            label: format!("random{sgn}"),
            dk1: &d1 * (sign * eps / norm1),
            dk2: zero_k2.clone(),
        });
        out.push(Perturbation {
            player: 2,
            label: format!("random{sgn}"),
            dk1: &d2c * (sign * eps / norm2),
            dk2: &d2p * (sign * eps / norm2),
        });
    }
    out
}

/// Checks both one-sided Nash inequalities against constant linear gain
/// perturbations with common random numbers. A deviation passes iff
/// `ΔJ >= -3 stderr` for the deviating player's own cost.
pub fn best_response_certificate(
    spec: &ProblemSpec,
    profile: &StrategyProfile,
    epsilons: &[f64],
    runs: usize,
    seed: u64,
) -> Result<NashCertificate> {
    assert!(!epsilons.is_empty(), "at least one epsilon");
    assert!(runs >= 2, "need at least two runs");
    let cl = ClosedLoop::new(spec, profile)?;
    let base = cl.run_costs(profile, runs, seed);
    let baseline = CostEstimate::from_runs(&base, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d1ec);
    let mut deviations = Vec::new();
    for &eps in epsilons {
        for p in perturbations(profile, eps, &mut rng) {
            let mut dev = profile.clone();
            for k in dev.k1.iter_mut() {
                *k += &p.dk1;
            }
            for k in dev.k2.iter_mut() {
                *k += &p.dk2;
            }
            let costs = cl.run_costs(&dev, runs, seed);
            let i = (p.player - 1) as usize;
            let (delta_j, stderr) = mean_stderr(costs.iter().zip(&base).map(|(c, b)| c[i] - b[i]));
            let pass = delta_j >= -3.0 * stderr;
            let note = (delta_j < 0.0 && delta_j.abs() < stderr).then(|| "inconclusive".to_string());
            deviations.push(Deviation {
                player: p.player,
                direction: p.label,
                epsilon: eps,
                delta_j,
                stderr,
                pass,
                note,
            });
        }
    }
    let overall_pass = deviations.iter().all(|d| d.pass);
    Ok(NashCertificate {
        baseline,
        deviations,
        overall_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{nash_profile, symmetric_profile};
    use crate::fixtures;
    use crate::model::paper_example;
    use crate::riccati::backward;

    fn nash(spec: &ProblemSpec) -> StrategyProfile {
        let aug = augment(spec);
        nash_profile(&backward(&aug, &spec.weights, spec.horizon).unwrap())
    }

    #[test]
    fn identity_e1_equals_e2_plus_d() {
        let spec = paper_example();
        let t = simulate(&spec, &nash(&spec), 3).unwrap();
        for k in 0..t.x.len() {
            let scale = t.x[k].amax() + t.xhat1_pred[k].amax() + t.xhat2_pred[k].amax();
            assert!((&t.e1[k] - (&t.e2[k] + &t.d[k])).amax() <= 4.0 * f64::EPSILON * scale);
        }
        assert_eq!(t.x.len(), spec.horizon + 2);
        assert_eq!(t.u1.len(), spec.horizon + 1);
    }

    #[test]
    fn simulation_is_deterministic() {
        let spec = paper_example();
        let p = nash(&spec);
        assert_eq!(simulate(&spec, &p, 11).unwrap(), simulate(&spec, &p, 11).unwrap());
        assert_ne!(simulate(&spec, &p, 11).unwrap(), simulate(&spec, &p, 12).unwrap());
        let a = estimate_costs(&spec, &p, 64, 5).unwrap();
        let b = estimate_costs(&spec, &p, 64, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_run_stays_at_rest() {
        let spec = fixtures::noiseless();
        let t = simulate(&spec, &nash(&spec), 0).unwrap();
        assert!(t.x.iter().all(|x| x.amax() == 0.0));
        assert!(t.u1.iter().chain(&t.u2).all(|u| u.amax() == 0.0));
        assert_eq!((t.realized_cost1, t.realized_cost2), (0.0, 0.0));
        assert_eq!(moment_oracle(&spec, &nash(&spec)).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn two_runs_give_finite_positive_stderr() {
        let spec = fixtures::scalar_s1();
        let est = estimate_costs(&spec, &nash(&spec), 2, 9).unwrap();
        assert!(est.stderr1.is_finite() && est.stderr1 > 0.0);
        assert!(est.stderr2.is_finite() && est.stderr2 > 0.0);
    }

    #[test]
    fn estimator2_tracks_better() {
        let spec = paper_example();
        let t = simulate(&spec, &nash(&spec), 0).unwrap();
        let ms = |e: &[Vector]| e.iter().map(|v| v.norm_squared()).sum::<f64>();
        assert!(ms(&t.e2) < ms(&t.e1));
    }

    #[test]
    fn forward_and_adjoint_routes_agree() {
        for spec in [paper_example(), fixtures::scalar_s1(), fixtures::unstable_scalar()] {
            let aug = augment(&spec);
            let rt = backward(&aug, &spec.weights, spec.horizon).unwrap();
            for p in [nash_profile(&rt), symmetric_profile(&rt)] {
                let cl = ClosedLoop::new(&spec, &p).unwrap();
                let (a1, a2) = cl.moment_costs(&p);
                let (b1, b2) = cl.adjoint_costs(&p);
                assert!((a1 - b1).abs() < 1e-10 * a1, "{a1} vs {b1}");
                assert!((a2 - b2).abs() < 1e-10 * a2, "{a2} vs {b2}");
            }
        }
    }

    #[test]
    fn moment_covariances_match_filter_recursion() {
        // E[e e'] from the propagated moments equals the covariance schedules.
        let spec = paper_example();
        let p = nash(&spec);
        let cl = ClosedLoop::new(&spec, &p).unwrap();
        let n = 2;
        for (k, m) in cl.second_moments(&p).iter().enumerate() {
            let x = m.view((0, 0), (n, n));
            let e1 = x - m.view((n, 0), (n, n)) - m.view((0, n), (n, n)) + m.view((n, n), (n, n));
            let e2 = x - m.view((2 * n, 0), (n, n)) - m.view((0, 2 * n), (n, n)) + m.view((2 * n, 2 * n), (n, n));
            assert!((e1 - &cl.schedule().sigma1_pred[k]).amax() < 1e-10, "k={k}");
            assert!((e2 - &cl.schedule().sigma2_pred[k]).amax() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn deterministic_orthogonality_is_zero() {
        let spec = fixtures::noiseless();
        let st = orthogonality_stats(&spec, &nash(&spec), 100, 1).unwrap();
        assert_eq!(st.max, [0.0; 3]);
    }

    #[test]
    fn identical_filters_have_no_private_estimate() {
        let spec = fixtures::identical_filters();
        let p = nash(&spec);
        let t = simulate(&spec, &p, 2).unwrap();
        assert!(t.d.iter().all(|d| d.amax() < 1e-12));
        let sym = symmetric_profile(&backward(&augment(&spec), &spec.weights, spec.horizon).unwrap());
        let ts = simulate(&spec, &sym, 2).unwrap();
        for k in 0..t.u1.len() {
            assert!((&t.u1[k] - &ts.u1[k]).amax() < 1e-10);
            assert!((&t.u2[k] - &ts.u2[k]).amax() < 1e-10);
        }
    }

    #[test]
    fn zero_gains_fail_certificate_on_unstable_plant() {
        let spec = fixtures::unstable_scalar();
        let zero = StrategyProfile::zero(1, 1, 1, spec.horizon);
        let cert = best_response_certificate(&spec, &zero, &[1e-2], 200, 4).unwrap();
        assert!(!cert.overall_pass);
    }
}
