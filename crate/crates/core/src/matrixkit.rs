//! Dense small-matrix building blocks.
//!
//! Everything here works on [`Mat`] (a dynamically sized, column-major
//! `f64` matrix). The vectorization convention is column stacking
//! throughout the crate, so that `(S2ᵀ ⊗ S1) vec(V) = vec(S1 V S2)`.

use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex<f64>>;
pub type C64 = Complex<f64>;

/// Validates the matrix invariants: strictly positive dimensions and
/// finite entries.
pub fn checked(m: Mat) -> Result<Mat> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(LqrError::Dimension(format!(
            "empty matrix ({}x{})",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(LqrError::Input("matrix has non-finite entries".into()));
    }
    Ok(m)
}

/// Builds a matrix from row-major nested rows.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    if r == 0 {
        return Err(LqrError::Dimension("no rows".into()));
    }
    let c = rows[0].len();
    if rows.iter().any(|row| row.len() != c) {
        return Err(LqrError::Dimension("ragged rows".into()));
    }
    checked(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

/// Row-major nested rows, the inverse of [`from_rows`].
pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Eigenvalues of a square matrix, with multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum(pub Vec<C64>);

impl Spectrum {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &C64> {
        self.0.iter()
    }

    /// Largest modulus.
    pub fn spectral_radius(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest real part.
    pub fn abscissa(&self) -> f64 {
        self.0.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Eigenvalues sorted by (re, im), convenient for comparisons.
    pub fn sorted(&self) -> Vec<C64> {
        let mut v = self.0.clone();
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }
}

fn require_square(m: &Mat, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(LqrError::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

/// All eigenvalues of a square matrix (Hessenberg reduction followed by
/// shifted QR iteration).
pub fn eigvals(m: &Mat) -> Result<Spectrum> {
    let n = require_square(m, "eigvals input")?;
    if n == 1 {
        return Ok(Spectrum(vec![C64::new(m[(0, 0)], 0.0)]));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000 * n)
        .ok_or_else(|| LqrError::Convergence("Schur iteration did not converge".into()))?;
    let ev = schur.complex_eigenvalues();
    Ok(Spectrum(ev.iter().copied().collect()))
}

/// Symmetric part `(S + Sᵀ)/2`.
pub fn sym(s: &Mat) -> Mat {
    (s + s.transpose()) * 0.5
}

/// Result of a symmetric eigendecomposition: ascending eigenvalues and
/// orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl SymEig {
    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn reconstruct(&self) -> Mat {
        let d = Mat::from_diagonal(&DVector::from_column_slice(&self.values));
        &self.vectors * d * self.vectors.transpose()
    }
}

/// Largest absolute entry.
pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Symmetric eigendecomposition. The input is symmetrized before
/// factoring; asymmetry above `1e-12·‖S‖` is rejected.
pub fn sym_eig(s: &Mat) -> Result<SymEig> {
    let n = require_square(s, "sym_eig input")?;
    let asym = (s - s.transpose()).norm();
    if asym > 1e-12 * s.norm().max(f64::MIN_POSITIVE) && asym > 0.0 {
        return Err(LqrError::Contract(format!(
            "matrix is not symmetric (asymmetry {asym:.3e})"
        )));
    }
    let se = SymmetricEigen::new(sym(s));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let values = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = Mat::from_fn(n, n, |r, c| se.eigenvectors[(r, order[c])]);
    Ok(SymEig { values, vectors })
}

/// Smallest eigenvalue of the symmetric part.
pub fn lambda_min(s: &Mat) -> f64 {
    sym_eig(&sym(s)).map(|e| e.min()).unwrap_or(f64::NAN)
}

/// Largest eigenvalue of the symmetric part.
pub fn lambda_max(s: &Mat) -> f64 {
    sym_eig(&sym(s)).map(|e| e.max()).unwrap_or(f64::NAN)
}

/// Kronecker product.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec(m: &Mat) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn mat(v: &DVector<f64>, rows: usize, cols: usize) -> Result<Mat> {
    if rows * cols != v.len() {
        return Err(LqrError::Dimension(format!(
            "cannot reshape length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(Mat::from_column_slice(rows, cols, v.as_slice()))
}

/// Solution of a square linear system with a 1-norm condition estimate.
#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub x: DVector<f64>,
    pub condition: f64,
}

const SINGULAR_CONDITION: f64 = 1e14;

fn norm1(m: &Mat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `M x = b` by LU with partial pivoting.
pub fn solve_linear(m: &Mat, b: &DVector<f64>) -> Result<LinearSolution> {
    let n = require_square(m, "system matrix")?;
    if b.len() != n {
        return Err(LqrError::Dimension(format!(
            "right-hand side has length {}, expected {n}",
            b.len()
        )));
    }
    let lu = m.clone().lu();
    let inv = lu
        .try_inverse()
        .ok_or_else(|| LqrError::Singular("LU factor has a zero pivot".into()))?;
    let condition = norm1(m) * norm1(&inv);
    if !condition.is_finite() || condition > SINGULAR_CONDITION {
        return Err(LqrError::Singular(format!(
            "condition estimate {condition:.3e} exceeds {SINGULAR_CONDITION:.0e}"
        )));
    }
    let mut x = lu
        .solve(b)
        .ok_or_else(|| LqrError::Singular("LU solve failed".into()))?;
    // one step of iterative refinement
    let r = b - m * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    Ok(LinearSolution { x, condition })
}

/// Default definiteness tolerance `1e-10·max(1, ‖S‖)`.
pub fn default_tol(s: &Mat) -> f64 {
    1e-10 * s.norm().max(1.0)
}

/// `λ_min(sym(S)) ≥ −tol`.
pub fn is_psd(s: &Mat, tol: f64) -> bool {
    lambda_min(s) >= -tol
}

/// `λ_min(sym(S)) > tol`.
pub fn is_pd(s: &Mat, tol: f64) -> bool {
    lambda_min(s) > tol
}

/// Frobenius inner product `⟨A, B⟩ = Tr(AᵀB)`.
pub fn inner(a: &Mat, b: &Mat) -> f64 {
    a.dot(b)
}

/// Symmetric PSD square root. Eigenvalues below `1e-13·λ_max` are
/// treated as zero, so roundoff in the null space does not turn into
/// `O(1e-8)` entries.
pub fn sqrt_psd(s: &Mat) -> Result<Mat> {
    let e = sym_eig(s)?;
    let floor = 1e-13 * e.max().max(0.0);
    let d: Vec<f64> = e
        .values
        .iter()
        .map(|&v| if v <= floor { 0.0 } else { v.sqrt() })
        .collect();
    let d = Mat::from_diagonal(&DVector::from_vec(d));
    Ok(sym(&(&e.vectors * d * e.vectors.transpose())))
}

/// Inverse of a symmetric positive definite matrix via its
/// eigendecomposition; rejects `λ_min ≤ 1e-12·λ_max`.
pub fn inv_spd(x: &Mat) -> Result<Mat> {
    let e = sym_eig(x)?;
    let (lo, hi) = (e.min(), e.max());
    if !(hi > 0.0) || lo <= 1e-12 * hi {
        return Err(LqrError::Domain(format!(
            "matrix is not safely positive definite (eigenvalues in [{lo:.3e}, {hi:.3e}])"
        )));
    }
    let d: Vec<f64> = e.values.iter().map(|v| 1.0 / v).collect();
    let d = Mat::from_diagonal(&DVector::from_vec(d));
    Ok(sym(&(&e.vectors * d * e.vectors.transpose())))
}

/// Numerical rank: number of singular values above `tol`.
pub fn rank(m: &Mat, tol: f64) -> usize {
    let svd = SVD::new(m.clone(), false, false);
    svd.singular_values.iter().filter(|&&s| s > tol).count()
}

/// Numerical rank of a complex matrix.
pub fn rank_complex(m: &CMat, tol: f64) -> usize {
    let svd = SVD::new(m.clone(), false, false);
    svd.singular_values.iter().filter(|&&s| s > tol).count()
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat) -> f64 {
    let svd = SVD::new(m.clone(), false, false);
    svd.singular_values.iter().copied().fold(0.0, f64::max)
}

/// Serde adapter writing a [`Mat`] as row-major nested arrays.
pub mod rows {
    use super::{from_rows, to_rows, Mat};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat, s: S) -> std::result::Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Mat, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Like [`rows`] for optional matrices.
pub mod opt_rows {
    use super::{from_rows, to_rows, Mat};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<Mat>, s: S) -> std::result::Result<S::Ok, S::Error> {
        m.as_ref().map(to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Mat>, D::Error> {
        let rows = Option::<Vec<Vec<f64>>>::deserialize(d)?;
        rows.map(|r| from_rows(&r).map_err(serde::de::Error::custom))
            .transpose()
    }
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|v| C64::new(v, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: &[&[f64]]) -> Mat {
        from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn eigvals_diagonal() {
        let d = Mat::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let ev = eigvals(&d).unwrap().sorted();
        for (z, want) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert_relative_eq!(z.re, want, epsilon = 1e-14);
            assert!(z.im.abs() < 1e-14);
        }
    }

    #[test]
    fn eigvals_rotation_generator() {
        let ev = eigvals(&m(&[&[0.0, 1.0], &[-1.0, 0.0]])).unwrap().sorted();
        assert!(ev[0].re.abs() < 1e-14 && ev[1].re.abs() < 1e-14);
        assert_relative_eq!(ev[0].im, -1.0, epsilon = 1e-14);
        assert_relative_eq!(ev[1].im, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eigvals_example_plant_matrix() {
        let ev = eigvals(&m(&[&[0.9, 0.01], &[0.01, 0.9]])).unwrap().sorted();
        assert_relative_eq!(ev[0].re, 0.89, epsilon = 1e-14);
        assert_relative_eq!(ev[1].re, 0.91, epsilon = 1e-14);
    }

    #[test]
    fn eigvals_rejects_non_square() {
        assert!(matches!(eigvals(&Mat::zeros(2, 3)), Err(LqrError::Dimension(_))));
    }

    #[test]
    fn sym_eig_examples() {
        let e = sym_eig(&Mat::identity(2, 2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        let e = sym_eig(&m(&[&[1.0, -1.0], &[-1.0, 1.0]])).unwrap();
        assert_relative_eq!(e.values[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(e.values[1], 2.0, epsilon = 1e-14);
        let e = sym_eig(&(m(&[&[1.0, 1.0], &[1.0, 1.0]]) * 25.0)).unwrap();
        assert!(e.values[0].abs() < 1e-12);
        assert_relative_eq!(e.values[1], 50.0, epsilon = 1e-12);
    }

    #[test]
    fn sym_eig_rejects_asymmetric() {
        assert!(matches!(
            sym_eig(&m(&[&[1.0, 2.0], &[0.0, 1.0]])),
            Err(LqrError::Contract(_))
        ));
    }

    #[test]
    fn kron_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let k = kron(&Mat::identity(2, 2), &a);
        let mut want = Mat::zeros(4, 4);
        want.view_mut((0, 0), (2, 2)).copy_from(&a);
        want.view_mut((2, 2), (2, 2)).copy_from(&a);
        assert_eq!(k, want);
        assert_eq!(kron(&m(&[&[2.0]]), &m(&[&[3.0]])), m(&[&[6.0]]));
    }

    #[test]
    fn vec_and_mat() {
        let a = m(&[&[1.0, 3.0], &[2.0, 4.0]]);
        assert_eq!(vec(&a).as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mat(&v, 2, 2).unwrap(), a);
        assert_eq!(vec(&Mat::zeros(2, 2)).as_slice(), &[0.0; 4]);
        assert!(matches!(mat(&v, 3, 2), Err(LqrError::Dimension(_))));
    }

    #[test]
    fn solve_linear_residual_and_singularity() {
        let a = m(&[&[4.0, 1.0], &[2.0, 3.0]]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let sol = solve_linear(&a, &b).unwrap();
        let res = (&a * &sol.x - &b).norm();
        assert!(res <= 1e-10 * (a.norm() * sol.x.norm() + b.norm()));
        assert!(sol.condition >= 1.0);
        let s = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(solve_linear(&s, &b), Err(LqrError::Singular(_))));
    }

    #[test]
    fn definiteness() {
        let i2 = Mat::identity(2, 2);
        assert!(is_pd(&i2, 1e-10));
        let q = m(&[&[1.0, -1.0], &[-1.0, 1.0]]);
        assert!(is_psd(&q, default_tol(&q)));
        assert!(!is_pd(&q, default_tol(&q)));
        assert!(!is_psd(&(-i2.clone()), 1e-10));
    }

    #[test]
    fn sqrt_and_inverse() {
        let s = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let r = sqrt_psd(&s).unwrap();
        assert!((&r * &r - &s).norm() < 1e-13);
        let inv = inv_spd(&s).unwrap();
        assert!((&inv * &s - Mat::identity(2, 2)).norm() < 1e-13);
        assert!(matches!(
            inv_spd(&m(&[&[1.0, 1.0], &[1.0, 1.0]])),
            Err(LqrError::Domain(_))
        ));
    }

    #[test]
    fn checked_rejects_nan() {
        assert!(checked(m(&[&[1.0]]).map(|x| x * f64::NAN)).is_err());
    }
}
