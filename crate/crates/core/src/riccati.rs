//! Optimal solutions from the algebraic Riccati equations.
//!
//! * CARE `AᵀP + PA + Q − PBR⁻¹BᵀP = 0`, `K* = −R⁻¹BᵀP`: stable invariant
//!   subspace of the Hamiltonian, refined by Newton–Kleinman.
//! * DARE `P = AᵀPA + Q − AᵀPB(R+BᵀPB)⁻¹BᵀPA`,
//!   `K* = −(R+BᵀPB)⁻¹BᵀPA`: value iteration from `P₀ = 0`.

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::lyapunov::{solve_dual_lyapunov, solve_lyapunov};
use crate::matrixkit::{self, eigvals, inner, is_psd, CMat, Mat, C64};
use crate::systems::{check_detectable, check_stabilizable, is_in_k, Plant, TimeModel};

/// Stopping rule of the DARE value iteration.
pub const DARE_RTOL: f64 = 1e-12;
pub const DARE_MAX_ITER: usize = 1_000_000;

/// Residual target of the Newton–Kleinman refinement.
pub const NEWTON_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiSolution {
    #[serde(with = "crate::matrixkit::rows")]
    pub p_star: Mat,
    #[serde(with = "crate::matrixkit::rows")]
    pub k_star: Mat,
    #[serde(with = "crate::matrixkit::rows")]
    pub x_star: Mat,
    pub j_star: f64,
    /// Frobenius norm of the Riccati defect at `p_star`.
    pub care_residual: f64,
}

/// Frobenius norm of the CARE or DARE defect at `P`.
pub fn riccati_residual(p: &Plant, pm: &Mat) -> Result<f64> {
    if pm.shape() != p.a.shape() {
        return Err(LqrError::Dimension("P must be n x n".into()));
    }
    let at = p.a.transpose();
    let bt = p.b.transpose();
    let defect = match p.time_model {
        TimeModel::Ct => {
            let r_inv_bt = solve_spd(&p.r, &bt)?;
            &at * pm + pm * &p.a + &p.q - pm * &p.b * r_inv_bt * pm
        }
        TimeModel::Dt => {
            let s = &p.r + &bt * pm * &p.b;
            let g = solve_spd(&s, &(&bt * pm * &p.a))?;
            &at * pm * &p.a - pm + &p.q - &at * pm * &p.b * g
        }
    };
    Ok(defect.norm())
}

fn solve_spd(s: &Mat, rhs: &Mat) -> Result<Mat> {
    s.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| LqrError::Singular("weight matrix is singular".into()))
}

fn require_standing_assumption(p: &Plant) -> Result<()> {
    if !check_stabilizable(p)? {
        return Err(LqrError::Assumption("(A, B) is not stabilizable".into()));
    }
    if !check_detectable(p)? {
        return Err(LqrError::Assumption("(Q^1/2, A) is not detectable".into()));
    }
    Ok(())
}

/// Optimal gain associated with a Riccati solution `P`.
pub fn gain_from_riccati(p: &Plant, pm: &Mat) -> Result<Mat> {
    let bt = p.b.transpose();
    match p.time_model {
        TimeModel::Ct => Ok(-solve_spd(&p.r, &(&bt * pm))?),
        TimeModel::Dt => {
            let s = &p.r + &bt * pm * &p.b;
            Ok(-solve_spd(&s, &(&bt * pm * &p.a))?)
        }
    }
}

fn assemble(p: &Plant, p_star: Mat) -> Result<RiccatiSolution> {
    let p_star = matrixkit::sym(&p_star);
    let k_star = gain_from_riccati(p, &p_star)?;
    if !is_in_k(p, &k_star)? {
        return Err(LqrError::Convergence(
            "Riccati solution does not yield a stabilizing gain".into(),
        ));
    }
    if !is_psd(&p_star, 1e-9 * (1.0 + p_star.norm())) {
        return Err(LqrError::Convergence("Riccati solution is not PSD".into()));
    }
    let care_residual = riccati_residual(p, &p_star)?;
    if care_residual > 1e-9 * (1.0 + p_star.norm()) {
        return Err(LqrError::Convergence(format!(
            "Riccati residual {care_residual:.3e} too large"
        )));
    }
    let a_cl = &p.a + &p.b * &k_star;
    let x_star = solve_lyapunov(&a_cl, &p.w, p.time_model)?.x;
    let j_star = inner(&(&p.q + k_star.transpose() * &p.r * &k_star), &x_star);
    Ok(RiccatiSolution {
        p_star,
        k_star,
        x_star,
        j_star,
        care_residual,
    })
}

/// Solves the Riccati equation matching the plant's time model.
pub fn solve(p: &Plant) -> Result<RiccatiSolution> {
    match p.time_model {
        TimeModel::Ct => solve_care(p),
        TimeModel::Dt => solve_dare(p),
    }
}

/// CARE: Hamiltonian stable subspace followed by Newton–Kleinman.
pub fn solve_care(p: &Plant) -> Result<RiccatiSolution> {
    if p.time_model != TimeModel::Ct {
        return Err(LqrError::Inapplicable("solve_care needs a CT plant".into()));
    }
    require_standing_assumption(p)?;
    let p0 = care_hamiltonian(p)?;
    let p_star = match care_newton_kleinman(p, &p0) {
        Ok(refined) => refined,
        // the subspace solution may already be at roundoff level
        Err(_) if riccati_residual(p, &p0)? <= 1e-9 * (1.0 + p0.norm()) => p0,
        Err(e) => return Err(e),
    };
    assemble(p, p_star)
}

/// Hamiltonian `[[A, −BR⁻¹Bᵀ], [−Q, −Aᵀ]]`.
pub fn hamiltonian(p: &Plant) -> Result<Mat> {
    let n = p.n();
    let s = &p.b * solve_spd(&p.r, &p.b.transpose())?;
    let mut h = Mat::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&p.a);
    h.view_mut((0, n), (n, n)).copy_from(&(-s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&p.q));
    h.view_mut((n, n), (n, n)).copy_from(&(-p.a.transpose()));
    Ok(h)
}

/// Right null vectors of `M` for the `k` smallest singular values.
fn smallest_right_singular(m: &CMat, k: usize) -> Result<Vec<nalgebra::DVector<C64>>> {
    let svd = SVD::new(m.clone(), false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| LqrError::Convergence("SVD did not return V".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| v_t.row(i).adjoint())
        .collect())
}

/// Stable invariant subspace of the Hamiltonian, `P = X₂X₁⁻¹`.
///
/// Eigenvalues in the open left half plane are clustered; each cluster of
/// multiplicity `k` at `λ` contributes the null space of `(H − λI)^k`
/// (its generalized eigenspace). Conjugate pairs are realified by taking
/// real and imaginary parts.
pub fn care_hamiltonian(p: &Plant) -> Result<Mat> {
    let n = p.n();
    let h = hamiltonian(p)?;
    let spec = eigvals(&h)?;
    let scale = 1.0 + spec.spectral_radius();
    let stable: Vec<C64> = spec.iter().copied().filter(|z| z.re < 0.0).collect();
    if stable.len() != n {
        return Err(LqrError::Assumption(format!(
            "Hamiltonian has {} stable eigenvalues, expected {n}",
            stable.len()
        )));
    }
    let cluster_tol = 1e-6 * scale;
    let mut clusters: Vec<(C64, usize)> = Vec::new();
    for z in stable.iter().filter(|z| z.im >= -cluster_tol) {
        let z = if z.im.abs() <= cluster_tol {
            C64::new(z.re, 0.0)
        } else {
            *z
        };
        match clusters.iter_mut().find(|(c, _)| (c - z).norm() <= cluster_tol) {
            Some((c, k)) => {
                *c = (*c * (*k as f64) + z) / (*k as f64 + 1.0);
                *k += 1;
            }
            None => clusters.push((z, 1)),
        }
    }
    let hc = matrixkit::to_complex(&h);
    let eye = CMat::identity(2 * n, 2 * n);
    let mut columns: Vec<nalgebra::DVector<f64>> = Vec::with_capacity(n);
    for (lambda, k) in clusters {
        let shifted = &hc - &eye * lambda;
        let mut power = shifted.clone();
        for _ in 1..k {
            power = &power * &shifted;
        }
        let vs = smallest_right_singular(&power, k)?;
        for v in vs {
            if lambda.im == 0.0 {
                // pick the better-conditioned real representative
                let re = v.map(|z| z.re);
                let im = v.map(|z| z.im);
                columns.push(if re.norm() >= im.norm() { re } else { im });
            } else {
                columns.push(v.map(|z| z.re));
                columns.push(v.map(|z| z.im));
            }
        }
    }
    if columns.len() != n {
        return Err(LqrError::Convergence(format!(
            "stable subspace has dimension {}, expected {n}",
            columns.len()
        )));
    }
    let u = Mat::from_columns(&columns);
    let x1 = u.rows(0, n).into_owned();
    let x2 = u.rows(n, n).into_owned();
    // P X₁ = X₂  ⇔  X₁ᵀ Pᵀ = X₂ᵀ
    let pt = x1
        .transpose()
        .lu()
        .solve(&x2.transpose())
        .ok_or_else(|| LqrError::Singular("stable subspace basis X1 is singular".into()))?;
    let pm = matrixkit::sym(&pt.transpose());
    if pm.iter().any(|v| !v.is_finite()) {
        return Err(LqrError::Singular("stable subspace basis X1 is singular".into()));
    }
    Ok(pm)
}

/// Newton–Kleinman iteration for the CARE seeded with `p0`, whose gain
/// must be stabilizing. Each step solves one dual Lyapunov equation.
pub fn care_newton_kleinman(p: &Plant, p0: &Mat) -> Result<Mat> {
    let tol = |pm: &Mat| NEWTON_RTOL * (1.0 + pm.norm());
    let mut pm = matrixkit::sym(p0);
    let mut best = (riccati_residual(p, &pm)?, pm.clone());
    for _ in 0..100 {
        if best.0 <= tol(&best.1) {
            return Ok(best.1);
        }
        let k = gain_from_riccati(p, &pm)?;
        let a_cl = &p.a + &p.b * &k;
        let m = &p.q + k.transpose() * &p.r * &k;
        let next = solve_dual_lyapunov(&a_cl, &m, TimeModel::Ct)?.x;
        let res = riccati_residual(p, &next)?;
        let step = (&next - &pm).norm();
        pm = next;
        if res < best.0 {
            best = (res, pm.clone());
        } else if step <= 1e-14 * (1.0 + pm.norm()) {
            break;
        }
    }
    if best.0 <= 1e-9 * (1.0 + best.1.norm()) {
        Ok(best.1)
    } else {
        Err(LqrError::Convergence(format!(
            "Newton-Kleinman stalled at residual {:.3e}",
            best.0
        )))
    }
}

/// DARE value iteration from `P₀ = 0`; `observe` sees every iterate.
pub fn dare_fixed_point(p: &Plant, mut observe: impl FnMut(&Mat)) -> Result<Mat> {
    let at = p.a.transpose();
    let bt = p.b.transpose();
    let mut pm = Mat::zeros(p.n(), p.n());
    observe(&pm);
    for _ in 0..DARE_MAX_ITER {
        let s = &p.r + &bt * &pm * &p.b;
        let g = solve_spd(&s, &(&bt * &pm * &p.a))?;
        let next = matrixkit::sym(&(&at * &pm * &p.a + &p.q - &at * &pm * &p.b * g));
        if next.iter().any(|v| !v.is_finite()) {
            return Err(LqrError::Convergence("DARE iteration diverged".into()));
        }
        let step = (&next - &pm).norm();
        let done = step <= DARE_RTOL * (1.0 + pm.norm());
        pm = next;
        observe(&pm);
        if done {
            return Ok(pm);
        }
    }
    Err(LqrError::Convergence(format!(
        "DARE iteration did not converge in {DARE_MAX_ITER} steps"
    )))
}

/// DARE by value iteration.
pub fn solve_dare(p: &Plant) -> Result<RiccatiSolution> {
    if p.time_model != TimeModel::Dt {
        return Err(LqrError::Inapplicable("solve_dare needs a DT plant".into()));
    }
    require_standing_assumption(p)?;
    let pm = dare_fixed_point(p, |_| {})?;
    assemble(p, pm)
}
