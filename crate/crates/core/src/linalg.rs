//! Small dense helpers on top of `nalgebra` used throughout the crate.

use nalgebra::{Complex, DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Condition-number ceiling for the SPD solves (gain Hessians, innovations).
pub const COND_LIMIT: f64 = 1e12;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn sym_eigenvalues(m: &Mat) -> Vector {
    symmetrize(m).symmetric_eigenvalues()
}

/// Minimum eigenvalue of the symmetric part. Empty matrices report 0.
pub fn min_sym_eig(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    sym_eigenvalues(m).min()
}

/// PSD test with the tolerance `-1e-10 * (1 + ||M||)`.
pub fn is_psd(m: &Mat) -> bool {
    min_sym_eig(m) >= -psd_tol(m)
}

pub fn psd_tol(m: &Mat) -> f64 {
    1e-10 * (1.0 + m.norm())
}

pub fn is_symmetric(m: &Mat, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol * (1.0 + m.amax())
}

/// Condition estimate of a symmetric matrix from its eigenvalues.
pub fn sym_condition(m: &Mat) -> f64 {
    let ev = sym_eigenvalues(m);
    let lo = ev.min();
    if lo <= 0.0 {
        return f64::INFINITY;
    }
    ev.max() / lo
}

/// Solves `H X = rhs` for symmetric positive definite `H`.
///
/// Returns `None` when `H` is not numerically positive definite or its
/// condition estimate exceeds [`COND_LIMIT`].
pub fn spd_solve(h: &Mat, rhs: &Mat) -> Option<Mat> {
    let h = symmetrize(h);
    if sym_condition(&h) > COND_LIMIT {
        return None;
    }
    let chol = h.cholesky()?;
    Some(chol.solve(rhs))
}

/// Symmetric PSD square root `V diag(sqrt(max(λ,0))) Vᵀ`.
pub fn psd_sqrt(m: &Mat) -> Mat {
    let eig = symmetrize(m).symmetric_eigen();
    let d = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * Mat::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// A factor `L` with `L Lᵀ = M` for PSD `M`; tolerates singular covariances.
pub fn psd_factor(m: &Mat) -> Mat {
    if m.is_empty() {
        return m.clone();
    }
    match symmetrize(m).cholesky() {
        Some(c) => c.l(),
        None => psd_sqrt(m),
    }
}

pub fn spectral_radius(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

pub fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut(a.shape(), b.shape()).copy_from(b);
    out
}

pub fn hstack(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.nrows(), b.nrows());
    let mut out = Mat::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

pub fn vstack(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a.ncols(), b.ncols());
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

/// Relative Frobenius change `||next - prev|| / (1 + ||prev||)`.
pub fn rel_change(next: &Mat, prev: &Mat) -> f64 {
    (next - prev).norm() / (1.0 + prev.norm())
}

/// `(F) M (F)ᵀ`
pub fn congruence(f: &Mat, m: &Mat) -> Mat {
    f * m * f.transpose()
}

fn to_complex(m: &Mat) -> DMatrix<Complex<f64>> {
    m.map(|v| Complex::new(v, 0.0))
}

fn complex_rank(m: &DMatrix<Complex<f64>>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let tol = 1e-9 * (1.0 + sv.max());
    sv.iter().filter(|s| **s > tol).count()
}

/// PBH test: every eigenvalue `λ` of `a` with `|λ| >= threshold` satisfies
/// `rank [A - λI, B] = n`. `threshold = 0` gives controllability,
/// `threshold = 1` stabilizability.
pub fn pbh_controllable(a: &Mat, b: &Mat, threshold: f64) -> bool {
    let n = a.nrows();
    let ac = to_complex(a);
    let bc = to_complex(b);
    a.complex_eigenvalues()
        .iter()
        .filter(|l| l.norm() >= threshold - 1e-12)
        .all(|l| {
            let mut m = DMatrix::<Complex<f64>>::zeros(n, n + b.ncols());
            let shifted = &ac - DMatrix::<Complex<f64>>::identity(n, n) * *l;
            m.view_mut((0, 0), (n, n)).copy_from(&shifted);
            m.view_mut((0, n), bc.shape()).copy_from(&bc);
            complex_rank(&m) == n
        })
}

/// Dual PBH test for observability (`threshold = 0`) or detectability (`1`).
pub fn pbh_observable(a: &Mat, c: &Mat, threshold: f64) -> bool {
    pbh_controllable(&a.transpose(), &c.transpose(), threshold)
}
