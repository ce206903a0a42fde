//! Exact policy evaluation: the Lyapunov variable `X_K`, the cost
//! `J(K) = ⟨Q + KᵀRK, X_K⟩`, its gradient, and the gradient-dominance
//! constant `μ_K = λ_min(R) λ_min(X_K)³ / λ_max(X*)²`.

use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::lyapunov::{solve_dual_lyapunov, solve_lyapunov, LyapunovCert};
use crate::matrixkit::{inner, lambda_max, lambda_min, Mat};
use crate::riccati::RiccatiSolution;
use crate::systems::{closed_loop, is_in_k, Plant, TimeModel};

/// Everything known about one stabilizing gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEval {
    #[serde(with = "crate::matrixkit::rows")]
    pub k: Mat,
    pub x_k: LyapunovCert,
    /// Solution of the dual equation with weight `Q + KᵀRK`.
    pub p_k: LyapunovCert,
    pub j: f64,
    #[serde(with = "crate::matrixkit::rows")]
    pub grad: Mat,
    pub mu_k: Option<f64>,
}

impl PolicyEval {
    pub fn grad_norm(&self) -> f64 {
        self.grad.norm()
    }
}

fn require_stabilizing(p: &Plant, k: &Mat) -> Result<Mat> {
    let a_cl = closed_loop(p, k)?;
    if !is_in_k(p, k)? {
        return Err(LqrError::Stability("gain is not stabilizing".into()));
    }
    Ok(a_cl)
}

/// `Q + KᵀRK`.
pub fn stage_weight(p: &Plant, k: &Mat) -> Mat {
    &p.q + k.transpose() * &p.r * k
}

/// The unique `X_K` solving the closed-loop Lyapunov equation.
pub fn lyapunov_variable(p: &Plant, k: &Mat) -> Result<LyapunovCert> {
    let a_cl = require_stabilizing(p, k)?;
    solve_lyapunov(&a_cl, &p.w, p.time_model)
}

/// `J(K) = ⟨Q + KᵀRK, X_K⟩`.
pub fn cost(p: &Plant, k: &Mat) -> Result<f64> {
    let x = lyapunov_variable(p, k)?;
    Ok(inner(&stage_weight(p, k), &x.x))
}

fn gradient_from(p: &Plant, k: &Mat, x_k: &Mat, p_k: &Mat) -> Mat {
    let bt = p.b.transpose();
    match p.time_model {
        TimeModel::Ct => (&p.r * k + &bt * p_k) * x_k * 2.0,
        TimeModel::Dt => ((&p.r + &bt * p_k * &p.b) * k + &bt * p_k * &p.a) * x_k * 2.0,
    }
}

/// Analytic gradient, from `X_K` and the dual solution `P_K`.
pub fn gradient(p: &Plant, k: &Mat) -> Result<Mat> {
    Ok(evaluate(p, k)?.grad)
}

/// Evaluates `X_K`, `P_K`, `J` and `∇J` with two Lyapunov solves.
pub fn evaluate(p: &Plant, k: &Mat) -> Result<PolicyEval> {
    let a_cl = require_stabilizing(p, k)?;
    let x_k = solve_lyapunov(&a_cl, &p.w, p.time_model)?;
    let weight = stage_weight(p, k);
    let p_k = solve_dual_lyapunov(&a_cl, &weight, p.time_model)?;
    let j = inner(&weight, &x_k.x);
    let grad = gradient_from(p, k, &x_k.x, &p_k.x);
    Ok(PolicyEval {
        k: k.clone(),
        x_k,
        p_k,
        j,
        grad,
        mu_k: None,
    })
}

/// [`evaluate`] plus `μ_K` whenever `X_K` is positive definite.
pub fn evaluate_with_mu(p: &Plant, k: &Mat, ric: &RiccatiSolution) -> Result<PolicyEval> {
    let mut ev = evaluate(p, k)?;
    if ev.x_k.pd {
        ev.mu_k = Some(mu_from(p, &ev.x_k.x, ric));
    }
    Ok(ev)
}

/// Default central-difference step `1e-6·(1 + ‖K‖_F)`.
pub fn default_fd_step(k: &Mat) -> f64 {
    1e-6 * (1.0 + k.norm())
}

/// Central finite differences of `J`. The step is reduced once (by 10×)
/// if a perturbed gain leaves the stabilizing set.
pub fn gradient_fd(p: &Plant, k: &Mat, h: Option<f64>) -> Result<Mat> {
    p.check_gain(k)?;
    let h0 = h.unwrap_or_else(|| default_fd_step(k));
    match fd_with_step(p, k, h0) {
        Err(LqrError::Stability(_)) => fd_with_step(p, k, h0 / 10.0),
        other => other,
    }
}

fn fd_with_step(p: &Plant, k: &Mat, h: f64) -> Result<Mat> {
    let mut g = Mat::zeros(k.nrows(), k.ncols());
    for i in 0..k.nrows() {
        for j in 0..k.ncols() {
            let mut kp = k.clone();
            kp[(i, j)] += h;
            let mut km = k.clone();
            km[(i, j)] -= h;
            g[(i, j)] = (cost(p, &kp)? - cost(p, &km)?) / (2.0 * h);
        }
    }
    Ok(g)
}

fn mu_from(p: &Plant, x_k: &Mat, ric: &RiccatiSolution) -> f64 {
    let lx = lambda_min(x_k);
    lambda_min(&p.r) * lx * lx * lx / lambda_max(&ric.x_star).powi(2)
}

/// `μ_K = λ_min(R) λ_min(X_K)³ / λ_max(X*)²`; requires `X_K ≻ 0`.
pub fn mu_of_k(p: &Plant, k: &Mat, ric: &RiccatiSolution) -> Result<f64> {
    let x = lyapunov_variable(p, k)?;
    if !x.pd {
        return Err(LqrError::Degeneracy(format!(
            "X_K is not positive definite (min eigenvalue {:.3e})",
            x.min_eig
        )));
    }
    Ok(mu_from(p, &x.x, ric))
}
