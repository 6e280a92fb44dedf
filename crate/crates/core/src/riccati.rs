//! Coupled Riccati recursions for the two players' cost-to-go matrices.
//!
//! Player 1's family `(P1, Phi1)` weights the common estimate and the
//! private innovation in its value function; player 2's family
//! `(Phi2, P2)` plays the same role for player 2. `P1` and `P2` drive the
//! gains, `Phi1` and `Phi2` are Lyapunov-type recursions along the other
//! player's closed loop.

use crate::error::{GameError, Result};
use crate::linalg::{rel_change, spd_solve, spectral_radius, symmetrize, Mat};
use crate::model::{AugmentedModel, CostWeights};

#[derive(Debug, Clone)]
pub struct Gains {
    /// Stacked common-part gain, `(m1+m2) x n`.
    pub k1: Mat,
    /// Private-part gain of player 2, `m2 x n`.
    pub k2: Mat,
    pub h1: Mat,
    pub h2: Mat,
}

/// `K1 = -H1⁻¹ Bᵀ P1' A`, `K2 = -H2⁻¹ B2ᵀ P2' A` with
/// `H1 = Γ1 + Bᵀ P1' B`, `H2 = R2 + B2ᵀ P2' B2`.
///
/// `step` is only used to label a singular-Hessian error.
pub fn gains_from(
    p1_next: &Mat,
    p2_next: &Mat,
    aug: &AugmentedModel,
    r2: &Mat,
    step: usize,
) -> Result<Gains> {
    let bt = aug.b.transpose();
    let b2t = aug.b2.transpose();
    let h1 = &aug.gamma1 + &bt * p1_next * &aug.b;
    let h2 = r2 + &b2t * p2_next * &aug.b2;
    let k1 = -spd_solve(&h1, &(&bt * p1_next * &aug.a))
        .ok_or(GameError::GainHessianSingular { player: 1, step })?;
    let k2 = -spd_solve(&h2, &(&b2t * p2_next * &aug.a))
        .ok_or(GameError::GainHessianSingular { player: 2, step })?;
    Ok(Gains { k1, k2, h1, h2 })
}

/// The four right-hand sides shared by the backward and forward passes.
struct Step {
    p1: Mat,
    phi1: Mat,
    p2: Mat,
    phi2: Mat,
}

fn riccati_step(
    aug: &AugmentedModel,
    w: &CostWeights,
    g: &Gains,
    p1: &Mat,
    phi1: &Mat,
    p2: &Mat,
    phi2: &Mat,
) -> Step {
    let cl1 = &aug.a + &aug.b * &g.k1;
    let cl2 = &aug.a + &aug.b2 * &g.k2;
    let k1t = g.k1.transpose();
    let k2t = g.k2.transpose();
    let cl1t = cl1.transpose();
    let cl2t = cl2.transpose();
    Step {
        p1: symmetrize(&(&cl1t * p1 * &cl1 + &w.q1 + &k1t * &aug.gamma1 * &g.k1)),
        phi1: symmetrize(&(&cl2t * phi1 * &cl2 + &k2t * &w.r1 * &g.k2)),
        phi2: symmetrize(&(&cl1t * phi2 * &cl1 + &k1t * &aug.gamma2 * &g.k1 + &w.q2)),
        p2: symmetrize(&(&cl2t * p2 * &cl2 + &w.q2 + &k2t * &w.r2 * &g.k2)),
    }
}

/// Finite-horizon solution; matrices indexed `0..=N+1`, gains `0..=N`.
#[derive(Debug, Clone)]
pub struct RiccatiTrajectory {
    pub p1: Vec<Mat>,
    pub phi1: Vec<Mat>,
    pub p2: Vec<Mat>,
    pub phi2: Vec<Mat>,
    pub k1: Vec<Mat>,
    pub k2: Vec<Mat>,
    pub h1: Vec<Mat>,
    pub h2: Vec<Mat>,
}

impl RiccatiTrajectory {
    pub fn horizon(&self) -> usize {
        self.k1.len() - 1
    }
}

pub fn backward(aug: &AugmentedModel, w: &CostWeights, horizon: usize) -> Result<RiccatiTrajectory> {
    let len = horizon + 2;
    let n = aug.n();
    let mut p1 = vec![Mat::zeros(n, n); len];
    let mut phi1 = p1.clone();
    let mut p2 = p1.clone();
    let mut phi2 = p1.clone();
    p1[horizon + 1] = w.p1_term.clone();
    phi1[horizon + 1] = w.phi1_term.clone();
    p2[horizon + 1] = w.p2_term.clone();
    phi2[horizon + 1] = w.phi2_term.clone();

    let mut gains = Vec::with_capacity(horizon + 1);
    for k in (0..=horizon).rev() {
        let g = gains_from(&p1[k + 1], &p2[k + 1], aug, &w.r2, k)?;
        let s = riccati_step(aug, w, &g, &p1[k + 1], &phi1[k + 1], &p2[k + 1], &phi2[k + 1]);
        p1[k] = s.p1;
        phi1[k] = s.phi1;
        p2[k] = s.p2;
        phi2[k] = s.phi2;
        gains.push(g);
    }
    gains.reverse();

    let mut out = RiccatiTrajectory {
        p1,
        phi1,
        p2,
        phi2,
        k1: Vec::with_capacity(horizon + 1),
        k2: Vec::with_capacity(horizon + 1),
        h1: Vec::with_capacity(horizon + 1),
        h2: Vec::with_capacity(horizon + 1),
    };
    for g in gains {
        out.k1.push(g.k1);
        out.k2.push(g.k2);
        out.h1.push(g.h1);
        out.h2.push(g.h2);
    }
    Ok(out)
}

/// Stationary solution of the coupled algebraic equations.
#[derive(Debug, Clone)]
pub struct SteadyRiccati {
    pub p1: Mat,
    pub phi1: Mat,
    pub p2: Mat,
    pub phi2: Mat,
    pub k1: Mat,
    pub k2: Mat,
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SteadyOptions {
    /// Initial value `a I` of all four matrices.
    pub init_scale: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            init_scale: 1.0,
            tol: 1e-10,
            max_iter: 2000,
        }
    }
}

/// Forward fixed-point iteration from `a I`, stopped when the joint relative
/// Frobenius change of the four matrices drops below `tol`.
pub fn forward_steady(
    aug: &AugmentedModel,
    w: &CostWeights,
    opts: SteadyOptions,
) -> Result<SteadyRiccati> {
    assert!(opts.init_scale > 0.0, "initial scale must be positive");
    let n = aug.n();
    let init = Mat::identity(n, n) * opts.init_scale;
    let (mut p1, mut phi1, mut p2, mut phi2) = (init.clone(), init.clone(), init.clone(), init);
    let mut history = Vec::new();

    for it in 1..=opts.max_iter {
        let g = gains_from(&p1, &p2, aug, &w.r2, it - 1)?;
        let s = riccati_step(aug, w, &g, &p1, &phi1, &p2, &phi2);
        let change = [
            rel_change(&s.p1, &p1),
            rel_change(&s.phi1, &phi1),
            rel_change(&s.p2, &p2),
            rel_change(&s.phi2, &phi2),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        history.push(change);
        (p1, phi1, p2, phi2) = (s.p1, s.phi1, s.p2, s.phi2);

        if change < opts.tol {
            let g = gains_from(&p1, &p2, aug, &w.r2, it)?;
            let sr = SteadyRiccati {
                p1,
                phi1,
                p2,
                phi2,
                k1: g.k1,
                k2: g.k2,
                iterations: it,
                residual: change,
                residual_history: history,
            };
            let (rho1, rho2) = closed_loop_spectra(&sr, aug);
            if rho1 >= 1.0 || rho2 >= 1.0 {
                return Err(GameError::NonStabilizing { rho1, rho2 });
            }
            return Ok(sr);
        }
    }
    Err(GameError::NoConvergence {
        iterations: opts.max_iter,
        residual: history.last().copied().unwrap_or(f64::INFINITY),
        history,
    })
}

/// Spectral radii of `A + B K1` and `A + B2 K2`.
pub fn closed_loop_spectra(sr: &SteadyRiccati, aug: &AugmentedModel) -> (f64, f64) {
    (
        spectral_radius(&(&aug.a + &aug.b * &sr.k1)),
        spectral_radius(&(&aug.a + &aug.b2 * &sr.k2)),
    )
}

/// Largest relative mismatch when the steady solution is substituted into
/// the right-hand sides of the algebraic equations.
pub fn fixed_point_residual(sr: &SteadyRiccati, aug: &AugmentedModel, w: &CostWeights) -> Result<f64> {
    let g = gains_from(&sr.p1, &sr.p2, aug, &w.r2, 0)?;
    let s = riccati_step(aug, w, &g, &sr.p1, &sr.phi1, &sr.p2, &sr.phi2);
    Ok([
        rel_change(&s.p1, &sr.p1),
        rel_change(&s.phi1, &sr.phi1),
        rel_change(&s.p2, &sr.p2),
        rel_change(&s.phi2, &sr.phi2),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}
