//! The two one-step-delayed estimators.
//!
//! Estimator 2 is a standard Kalman filter on the stacked measurement.
//! Estimator 1 only sees sensor 1; its error picks up player 2's private
//! action, so its covariance recursion depends on the gain `K2`.

use crate::error::{GameError, Result};
use crate::linalg::{congruence, min_sym_eig, rel_change, spd_solve, symmetrize, Mat, Vector};
use crate::model::AugmentedModel;

#[derive(Debug, Clone)]
pub struct CovarianceSchedule {
    /// `Σ¹_{k|k-1}`, `k = 0..=N+1`.
    pub sigma1_pred: Vec<Mat>,
    pub sigma2_pred: Vec<Mat>,
    /// `Σ¹_{k|k}`, `k = 0..=N`.
    pub sigma1_filt: Vec<Mat>,
    pub sigma2_filt: Vec<Mat>,
    /// `n x p1`
    pub g1: Vec<Mat>,
    /// `n x (p1+p2)`
    pub g2: Vec<Mat>,
}

impl CovarianceSchedule {
    pub fn horizon(&self) -> usize {
        self.g1.len() - 1
    }
}

/// `Σ Cᵀ (C Σ Cᵀ + R)⁻¹`
pub(crate) fn kalman_gain(sigma: &Mat, c: &Mat, r: &Mat) -> Option<Mat> {
    let s = congruence(c, sigma) + r;
    spd_solve(&s, &(c * sigma)).map(|x| x.transpose())
}

/// Joseph form `(I - G C) Σ (I - G C)ᵀ + G R Gᵀ`.
fn joseph(sigma: &Mat, g: &Mat, c: &Mat, r: &Mat) -> Mat {
    let n = sigma.nrows();
    let l = Mat::identity(n, n) - g * c;
    symmetrize(&(congruence(&l, sigma) + congruence(g, r)))
}

/// One-step prediction of estimator 1's error covariance given the private
/// gain `K2` and estimator 2's predicted covariance.
pub(crate) fn predict_sigma1(aug: &AugmentedModel, sigma1: &Mat, sigma2: &Mat, g1: &Mat, k2: &Mat) -> Mat {
    let n = aug.n();
    let l = &aug.a * (Mat::identity(n, n) - g1 * &aug.c1);
    let coupled = &l + &aug.b2 * k2;
    symmetrize(
        &(congruence(&coupled, &(sigma1 - sigma2))
            + congruence(&l, sigma2)
            + congruence(&(&aug.a * g1), &aug.qv1)
            + &aug.qw),
    )
}

fn gains_at(aug: &AugmentedModel, s1: &Mat, s2: &Mat, step: Option<usize>) -> Result<(Mat, Mat)> {
    let g1 = kalman_gain(s1, &aug.c1, &aug.qv1).ok_or_else(|| GameError::InnovationSingular {
        name: "estimator 1".into(),
        step,
    })?;
    let g2 = kalman_gain(s2, &aug.c, &aug.qv).ok_or_else(|| GameError::InnovationSingular {
        name: "estimator 2".into(),
        step,
    })?;
    Ok((g1, g2))
}

/// Runs both covariance recursions over `k = 0..=N`, `N = k2.len() - 1`.
pub fn covariance_forward(aug: &AugmentedModel, sigma0: &Mat, k2: &[Mat]) -> Result<CovarianceSchedule> {
    let horizon = k2.len().checked_sub(1).expect("at least one gain");
    let mut out = CovarianceSchedule {
        sigma1_pred: vec![sigma0.clone()],
        sigma2_pred: vec![sigma0.clone()],
        sigma1_filt: Vec::with_capacity(horizon + 1),
        sigma2_filt: Vec::with_capacity(horizon + 1),
        g1: Vec::with_capacity(horizon + 1),
        g2: Vec::with_capacity(horizon + 1),
    };
    for (k, k2k) in k2.iter().enumerate() {
        let s1 = &out.sigma1_pred[k];
        let s2 = &out.sigma2_pred[k];
        let (g1, g2) = gains_at(aug, s1, s2, Some(k))?;
        let f1 = joseph(s1, &g1, &aug.c1, &aug.qv1);
        let f2 = joseph(s2, &g2, &aug.c, &aug.qv);
        let next2 = symmetrize(&(congruence(&aug.a, &f2) + &aug.qw));
        let next1 = predict_sigma1(aug, s1, s2, &g1, k2k);
        out.sigma1_pred.push(next1);
        out.sigma2_pred.push(next2);
        out.sigma1_filt.push(f1);
        out.sigma2_filt.push(f2);
        out.g1.push(g1);
        out.g2.push(g2);
    }
    Ok(out)
}

/// Predicted and filtered estimates of both estimators at time `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub xhat1_pred: Vector,
    pub xhat2_pred: Vector,
    pub xhat1_filt: Vector,
    pub xhat2_filt: Vector,
    pub k: usize,
}

impl FilterState {
    pub fn initial(mu: &Vector) -> Self {
        Self {
            xhat1_pred: mu.clone(),
            xhat2_pred: mu.clone(),
            xhat1_filt: mu.clone(),
            xhat2_filt: mu.clone(),
            k: 0,
        }
    }
}

/// Measurement update at `k` followed by the prediction to `k + 1`.
///
/// Estimator 1 propagates with the common action `uhat`; estimator 2 also
/// knows player 2's private action `utilde2`.
#[allow(clippy::too_many_arguments)]
pub fn filter_step(
    state: &FilterState,
    y1: &Vector,
    y2: &Vector,
    uhat: &Vector,
    utilde2: &Vector,
    g1: &Mat,
    g2: &Mat,
    aug: &AugmentedModel,
) -> FilterState {
    let y = Vector::from_iterator(y1.len() + y2.len(), y1.iter().chain(y2.iter()).copied());
    let f1 = &state.xhat1_pred + g1 * (y1 - &aug.c1 * &state.xhat1_pred);
    let f2 = &state.xhat2_pred + g2 * (y - &aug.c * &state.xhat2_pred);
    let common = &aug.b * uhat;
    FilterState {
        xhat1_pred: &aug.a * &f1 + &common,
        xhat2_pred: &aug.a * &f2 + common + &aug.b2 * utilde2,
        xhat1_filt: f1,
        xhat2_filt: f2,
        k: state.k + 1,
    }
}

#[derive(Debug, Clone)]
pub struct SteadyCovariances {
    pub sigma1: Mat,
    pub sigma2: Mat,
    pub g1: Mat,
    pub g2: Mat,
    pub iterations: usize,
}

/// Fixed points of both predicted-covariance recursions under a constant
/// private gain. `Σ²` is solved first; `Σ¹` and `G¹` are then iterated
/// jointly without damping.
pub fn steady_covariances(aug: &AugmentedModel, k2: &Mat, tol: f64, max_iter: usize) -> Result<SteadyCovariances> {
    let mut s2 = aug.qw.clone();
    let mut iters = 0;
    let mut converged = false;
    let mut last = f64::INFINITY;
    for _ in 0..max_iter {
        iters += 1;
        let g2 = kalman_gain(&s2, &aug.c, &aug.qv).ok_or_else(|| GameError::InnovationSingular {
            name: "estimator 2".into(),
            step: None,
        })?;
        let next = symmetrize(&(congruence(&aug.a, &joseph(&s2, &g2, &aug.c, &aug.qv)) + &aug.qw));
        last = rel_change(&next, &s2);
        s2 = next;
        if last < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(GameError::NoConvergence {
            iterations: max_iter,
            residual: last,
            history: vec![last],
        });
    }

    let mut s1 = s2.clone();
    converged = false;
    for _ in 0..max_iter {
        iters += 1;
        let (g1, _) = gains_at(aug, &s1, &s2, None)?;
        let next = predict_sigma1(aug, &s1, &s2, &g1, k2);
        last = rel_change(&next, &s1);
        s1 = next;
        if last < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(GameError::NoConvergence {
            iterations: max_iter,
            residual: last,
            history: vec![last],
        });
    }
    let (g1, g2) = gains_at(aug, &s1, &s2, None)?;
    Ok(SteadyCovariances {
        sigma1: s1,
        sigma2: s2,
        g1,
        g2,
        iterations: iters,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRow {
    pub k: usize,
    /// Minimum eigenvalue of `Σ¹_{k|k-1} - Σ²_{k|k-1}`.
    pub min_eig: f64,
    pub tr_sigma1: f64,
    pub tr_sigma2: f64,
}

pub fn covariance_gap(sched: &CovarianceSchedule) -> Vec<GapRow> {
    sched
        .sigma1_pred
        .iter()
        .zip(&sched.sigma2_pred)
        .enumerate()
        .map(|(k, (s1, s2))| GapRow {
            k,
            min_eig: min_sym_eig(&(s1 - s2)),
            tr_sigma1: s1.trace(),
            tr_sigma2: s2.trace(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{augment, paper_example};
    use crate::riccati::backward;

    fn schedule(spec: &crate::model::ProblemSpec) -> CovarianceSchedule {
        let aug = augment(spec);
        let rt = backward(&aug, &spec.weights, spec.horizon).unwrap();
        covariance_forward(&aug, &spec.system.sigma, &rt.k2).unwrap()
    }

    #[test]
    fn perfect_measurement_limit() {
        let mut spec = paper_example();
        spec.system.qv2 = Mat::identity(2, 2) * 1e-12;
        let sched = schedule(&spec);
        for k in 0..=spec.horizon {
            assert!(sched.sigma2_filt[k].amax() < 1e-8);
            assert!((&sched.sigma2_pred[k + 1] - &spec.system.qw).amax() < 1e-8);
        }
    }

    #[test]
    fn identical_filters_coincide() {
        let sched = schedule(&fixtures::identical_filters());
        for (a, b) in sched.sigma1_pred.iter().zip(&sched.sigma2_pred) {
            assert!((a - b).amax() < 1e-14);
        }
        for row in covariance_gap(&sched) {
            assert!(row.min_eig.abs() < 1e-12);
        }
    }

    #[test]
    fn estimator2_is_more_accurate_on_builtin_example() {
        let sched = schedule(&paper_example());
        for row in covariance_gap(&sched).iter().skip(1) {
            assert!(row.tr_sigma1 > row.tr_sigma2, "k={}", row.k);
            assert!(row.min_eig >= -1e-8);
        }
    }

    #[test]
    fn estimator2_does_not_depend_on_private_gain() {
        let spec = paper_example();
        let aug = augment(&spec);
        let rt = backward(&aug, &spec.weights, spec.horizon).unwrap();
        let with = covariance_forward(&aug, &spec.system.sigma, &rt.k2).unwrap();
        let zeros: Vec<_> = rt.k2.iter().map(|k| Mat::zeros(k.nrows(), k.ncols())).collect();
        let without = covariance_forward(&aug, &spec.system.sigma, &zeros).unwrap();
        assert_eq!(with.sigma2_pred, without.sigma2_pred);
        assert_ne!(with.sigma1_pred, without.sigma1_pred);
    }

    #[test]
    fn deterministic_system_tracks_state() {
        let spec = fixtures::noiseless();
        let aug = augment(&spec);
        let sched = schedule(&spec);
        let mut state = FilterState::initial(&Vector::from_vec(vec![0.3, -0.2]));
        let mut x = state.xhat1_pred.clone();
        let u = Vector::from_vec(vec![0.1, 0.0, -0.1, 0.2]);
        let ut = Vector::zeros(2);
        for k in 0..5 {
            let y1 = &aug.c1 * &x;
            let y2 = &spec.system.c2 * &x;
            state = filter_step(&state, &y1, &y2, &u, &ut, &sched.g1[k], &sched.g2[k], &aug);
            x = &aug.a * &x + &aug.b * &u;
            assert!((&state.xhat1_pred - &x).amax() < 1e-12);
            assert!((&state.xhat2_pred - &x).amax() < 1e-12);
        }
    }

    #[test]
    fn scalar_update_by_hand() {
        let spec = fixtures::scalar_s1();
        let aug = augment(&spec);
        let sched = schedule(&spec);
        // Σ = 0.2, R1 = 0.5 -> G1 = 0.2 / 0.7; stacked sensor: G2 = 0.2 [1 1] (0.2 11ᵀ + diag(.5,.1))⁻¹
        let g1 = 0.2 / 0.7;
        assert!((sched.g1[0][(0, 0)] - g1).abs() < 1e-15);
        let det = 0.7 * 0.3 - 0.04;
        let g2 = [0.2 * (0.3 - 0.2) / det, 0.2 * (0.7 - 0.2) / det];
        assert!((sched.g2[0][(0, 0)] - g2[0]).abs() < 1e-14);
        assert!((sched.g2[0][(0, 1)] - g2[1]).abs() < 1e-14);

        let state = FilterState::initial(&Vector::zeros(1));
        let y1 = Vector::from_element(1, 1.0);
        let y2 = Vector::from_element(1, 2.0);
        let uhat = Vector::from_vec(vec![0.5, -0.25]);
        let ut = Vector::from_element(1, 0.1);
        let next = filter_step(&state, &y1, &y2, &uhat, &ut, &sched.g1[0], &sched.g2[0], &aug);
        let f1 = g1;
        let f2 = g2[0] + 2.0 * g2[1];
        assert!((next.xhat1_filt[0] - f1).abs() < 1e-14);
        assert!((next.xhat1_pred[0] - (0.9 * f1 + 0.25)).abs() < 1e-14);
        assert!((next.xhat2_pred[0] - (0.9 * f2 + 0.25 + 0.1)).abs() < 1e-14);
        assert_eq!(next.k, 1);
    }

    #[test]
    fn steady_noiseless_is_zero() {
        let mut spec = paper_example();
        spec.system.qw = Mat::zeros(2, 2);
        let aug = augment(&spec);
        let sc = steady_covariances(&aug, &Mat::zeros(2, 2), 1e-12, 100).unwrap();
        assert_eq!(sc.sigma1.amax(), 0.0);
        assert_eq!(sc.sigma2.amax(), 0.0);
    }

    #[test]
    fn steady_identical_filters() {
        let spec = fixtures::identical_filters();
        let aug = augment(&spec);
        let k2 = Mat::from_row_slice(2, 2, &[-0.1, 0.05, 0.0, -0.2]);
        let sc = steady_covariances(&aug, &k2, 1e-13, 10_000).unwrap();
        assert!((&sc.sigma1 - &sc.sigma2).amax() < 1e-10);
    }
}
