//! Lyapunov equations by direct solution of the vectorized (Kronecker)
//! system:
//!
//! * CT: `A X + X Aᵀ + W = 0`, i.e. `(I⊗A + A⊗I) vec(X) = −vec(W)`
//! * DT: `A X Aᵀ − X + W = 0`, i.e. `(I − A⊗A) vec(X) = vec(W)`
//!
//! The dense `n²×n²` solve costs `O(n⁶)` time and `O(n⁴)` memory, which is
//! fine up to `n ≈ 30`.

use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::matrixkit::{self, kron, mat, solve_linear, sym_eig, vec, Mat};
use crate::systems::{is_stable, TimeModel};

/// A solved Lyapunov variable with residual and definiteness metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCert {
    #[serde(with = "crate::matrixkit::rows")]
    pub x: Mat,
    pub residual_norm: f64,
    pub pd: bool,
    pub min_eig: f64,
}

impl LyapunovCert {
    fn from_solution(x: Mat, residual_norm: f64) -> Result<Self> {
        let e = sym_eig(&x)?;
        let min_eig = e.min();
        let pd = min_eig > matrixkit::default_tol(&x);
        Ok(LyapunovCert {
            x,
            residual_norm,
            pd,
            min_eig,
        })
    }

    pub fn max_eig(&self) -> f64 {
        matrixkit::lambda_max(&self.x)
    }
}

/// Backward-error scale `1e-10·(1 + ‖W‖ + c‖X‖)` with `c = 2‖A‖` (CT)
/// or `c = 1 + ‖A‖²` (DT).
fn residual_tol(a_cl: &Mat, x: &Mat, w: &Mat, tm: TimeModel) -> f64 {
    let a = a_cl.norm();
    let c = match tm {
        TimeModel::Ct => 2.0 * a,
        TimeModel::Dt => 1.0 + a * a,
    };
    1e-10 * (1.0 + w.norm() + c * x.norm())
}

fn check_shapes(a_cl: &Mat, w: &Mat) -> Result<usize> {
    let n = a_cl.nrows();
    if a_cl.ncols() != n || w.nrows() != n || w.ncols() != n {
        return Err(LqrError::Dimension(format!(
            "Lyapunov data: A is {}x{}, W is {}x{}",
            a_cl.nrows(),
            a_cl.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(n)
}

/// Frobenius norm of the defining equation's left-hand side.
pub fn lyapunov_residual(a_cl: &Mat, x: &Mat, w: &Mat, tm: TimeModel) -> Result<f64> {
    check_shapes(a_cl, w)?;
    if x.shape() != w.shape() {
        return Err(LqrError::Dimension("X and W shapes differ".into()));
    }
    let lhs = match tm {
        TimeModel::Ct => a_cl * x + x * a_cl.transpose() + w,
        TimeModel::Dt => a_cl * x * a_cl.transpose() - x + w,
    };
    Ok(lhs.norm())
}

/// The `n²×n²` operator acting on `vec(X)`.
pub fn kronecker_operator(a_cl: &Mat, tm: TimeModel) -> Mat {
    let n = a_cl.nrows();
    let eye = Mat::identity(n, n);
    match tm {
        TimeModel::Ct => kron(&eye, a_cl) + kron(a_cl, &eye),
        TimeModel::Dt => Mat::identity(n * n, n * n) - kron(a_cl, a_cl),
    }
}

/// Solves the Lyapunov equation whatever the stability of `a_cl`; the
/// solution may be indefinite. Fails when the Kronecker operator is
/// singular (`λᵢ+λⱼ = 0` in CT, `λᵢλⱼ = 1` in DT).
pub fn solve_lyapunov_unrestricted(a_cl: &Mat, w: &Mat, tm: TimeModel) -> Result<LyapunovCert> {
    let n = check_shapes(a_cl, w)?;
    let op = kronecker_operator(a_cl, tm);
    let rhs = match tm {
        TimeModel::Ct => -vec(w),
        TimeModel::Dt => vec(w),
    };
    let sol = solve_linear(&op, &rhs)?;
    let x = matrixkit::sym(&mat(&sol.x, n, n)?);
    let residual_norm = lyapunov_residual(a_cl, &x, w, tm)?;
    let tol = residual_tol(a_cl, &x, w, tm) * sol.condition.max(1.0);
    if !(residual_norm <= tol) {
        return Err(LqrError::Singular(format!(
            "Lyapunov residual {residual_norm:.3e} exceeds {tol:.3e}"
        )));
    }
    LyapunovCert::from_solution(x, residual_norm)
}

/// Solves the Lyapunov equation for a stable `a_cl`.
pub fn solve_lyapunov(a_cl: &Mat, w: &Mat, tm: TimeModel) -> Result<LyapunovCert> {
    check_shapes(a_cl, w)?;
    if !is_stable(a_cl, tm)? {
        return Err(LqrError::Stability(format!(
            "closed-loop matrix is not {}",
            match tm {
                TimeModel::Ct => "Hurwitz",
                TimeModel::Dt => "Schur",
            }
        )));
    }
    let cert = solve_lyapunov_unrestricted(a_cl, w, tm)?;
    let tol = residual_tol(a_cl, &cert.x, w, tm);
    if cert.residual_norm > tol {
        return Err(LqrError::Singular(format!(
            "Lyapunov residual {:.3e} exceeds {tol:.3e}",
            cert.residual_norm
        )));
    }
    Ok(cert)
}

/// Dual equation `A_clᵀ P + P A_cl + M = 0` (CT) or
/// `A_clᵀ P A_cl − P + M = 0` (DT).
pub fn solve_dual_lyapunov(a_cl: &Mat, m: &Mat, tm: TimeModel) -> Result<LyapunovCert> {
    solve_lyapunov(&a_cl.transpose(), m, tm)
}
