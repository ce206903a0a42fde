//! Convex lift of the policy problem.
//!
//! The change of variables `Υ(K, X) = ((K − K*)X, X)` maps feasible
//! pairs of the Lyapunov-inequality problem onto
//!
//! ```text
//! min  f_cvx(Y, X) = ⟨Q + K*ᵀRK*, X⟩ + ⟨R, YX⁻¹Yᵀ⟩ + 2 Tr((RK*)ᵀY)
//! s.t. Ψ([A°X + BY; X] X⁻¹ [A°X + BY; X]ᵀ) + W ⪯ 0,   X ≻ 0
//! ```
//!
//! with `A° = A + BK*`. In continuous time the constraint is linear,
//! `A°X + BY + (A°X + BY)ᵀ + W ⪯ 0`; in discrete time it is tested through
//! the Schur complement `[[X − W, M], [Mᵀ, X]] ⪰ 0`, `M = A°X + BY`.

use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::lqr::{evaluate, stage_weight};
use crate::lyapunov::solve_lyapunov;
use crate::matrixkit::{inner, inv_spd, is_pd, kron, lambda_max, lambda_min, sym, vec, Mat};
use crate::riccati::RiccatiSolution;
use crate::systems::{closed_loop, Plant, TimeModel};

/// Relative slack for all checks in this module.
pub const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedPoint {
    #[serde(with = "crate::matrixkit::rows")]
    pub y: Mat,
    #[serde(with = "crate::matrixkit::rows")]
    pub x: Mat,
}

impl LiftedPoint {
    /// Convex combination `(1 − θ)·self + θ·other`.
    pub fn lerp(&self, other: &LiftedPoint, theta: f64) -> LiftedPoint {
        LiftedPoint {
            y: &self.y * (1.0 - theta) + &other.y * theta,
            x: sym(&(&self.x * (1.0 - theta) + &other.x * theta)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgradient {
    #[serde(with = "crate::matrixkit::rows")]
    pub h1: Mat,
    #[serde(with = "crate::matrixkit::rows")]
    pub h2: Mat,
}

/// Jacobian of `(Y, X) ↦ (vec K, vec X)` under `Π`, in column-stacked
/// coordinates `[vec Y; vec X]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianGamma {
    pub gamma: Mat,
    pub m: usize,
    pub n: usize,
}

impl JacobianGamma {
    /// The lower-left block is exactly zero and the lower-right block is
    /// exactly the identity.
    pub fn structure_exact(&self) -> bool {
        let (mn, nn) = (self.m * self.n, self.n * self.n);
        let ll = self.gamma.view((mn, 0), (nn, mn));
        let lr = self.gamma.view((mn, mn), (nn, nn));
        ll.iter().all(|&v| v == 0.0)
            && (0..nn).all(|i| (0..nn).all(|j| lr[(i, j)] == if i == j { 1.0 } else { 0.0 }))
    }
}

fn require_pd(x: &Mat) -> Result<Mat> {
    inv_spd(x)
}

/// `Y X⁻¹ Yᵀ` through the Cholesky factor of `X`, so the result stays
/// symmetric PSD and accurate when `X` is poorly conditioned.
pub fn inv_quad(y: &Mat, x: &Mat) -> Result<Mat> {
    require_pd(x)?;
    let chol = sym(x)
        .cholesky()
        .ok_or_else(|| LqrError::Domain("Cholesky factorization of X failed".into()))?;
    let z = chol
        .l()
        .solve_lower_triangular(&y.transpose())
        .ok_or_else(|| LqrError::Domain("triangular solve failed".into()))?;
    Ok(z.transpose() * z)
}

/// `Υ(K, X) = ((K − K*)X, X)`.
pub fn upsilon(k: &Mat, x: &Mat, k_star: &Mat) -> Result<LiftedPoint> {
    require_pd(x)?;
    Ok(LiftedPoint {
        y: (k - k_star) * x,
        x: x.clone(),
    })
}

/// `Π(Y, X) = (YX⁻¹ + K*, X)`.
pub fn pi_inverse(lp: &LiftedPoint, k_star: &Mat) -> Result<(Mat, Mat)> {
    let x_inv = require_pd(&lp.x)?;
    Ok((&lp.y * x_inv + k_star, lp.x.clone()))
}

/// Lifted cost `f_cvx(Y, X)`.
pub fn f_cvx(lp: &LiftedPoint, p: &Plant, k_star: &Mat) -> Result<f64> {
    let q_star = stage_weight(p, k_star);
    let quad = inner(&p.r, &inv_quad(&lp.y, &lp.x)?);
    let lin = 2.0 * inner(&(&p.r * k_star), &lp.y);
    Ok(inner(&q_star, &lp.x) + quad + lin)
}

fn feas_scale(p: &Plant) -> f64 {
    SLACK * (1.0 + p.w.norm())
}

/// `Ψ([A°X + BY; X] X⁻¹ [·]ᵀ) + W`, the left-hand side of the constraint.
pub fn ineq_lhs(p: &Plant, k_star: &Mat, lp: &LiftedPoint) -> Result<Mat> {
    let a0 = closed_loop(p, k_star)?;
    let m = &a0 * &lp.x + &p.b * &lp.y;
    Ok(sym(&match p.time_model {
        TimeModel::Ct => &m + m.transpose() + &p.w,
        TimeModel::Dt => {
            let x_inv = require_pd(&lp.x)?;
            &m * x_inv * m.transpose() - &lp.x + &p.w
        }
    }))
}

/// Constraint in its `X⁻¹` form: `λ_max(LHS) ≤ 1e-9·(1 + ‖W‖)` and
/// `X ≻ 0`.
pub fn feasible_ineq(p: &Plant, k_star: &Mat, lp: &LiftedPoint) -> bool {
    if !x_is_pd(&lp.x) {
        return false;
    }
    match ineq_lhs(p, k_star, lp) {
        Ok(lhs) => lambda_max(&lhs) <= feas_scale(p),
        Err(_) => false,
    }
}

fn x_is_pd(x: &Mat) -> bool {
    x.nrows() == x.ncols() && is_pd(x, 0.0) && require_pd(x).is_ok()
}

/// Discrete-time Schur-complement form `[[X − W, M], [Mᵀ, X]] ⪰ 0`.
pub fn feasible_ineq_schur_dt(p: &Plant, k_star: &Mat, lp: &LiftedPoint) -> Result<bool> {
    if p.time_model != TimeModel::Dt {
        return Err(LqrError::Inapplicable(
            "the Schur-complement form is for discrete time".into(),
        ));
    }
    if !x_is_pd(&lp.x) {
        return Ok(false);
    }
    Ok(lambda_min(&schur_block(p, k_star, lp)?) >= -feas_scale(p))
}

fn schur_block(p: &Plant, k_star: &Mat, lp: &LiftedPoint) -> Result<Mat> {
    let n = p.n();
    let a0 = closed_loop(p, k_star)?;
    let m = &a0 * &lp.x + &p.b * &lp.y;
    let mut blk = Mat::zeros(2 * n, 2 * n);
    blk.view_mut((0, 0), (n, n)).copy_from(&(&lp.x - &p.w));
    blk.view_mut((0, n), (n, n)).copy_from(&m);
    blk.view_mut((n, 0), (n, n)).copy_from(&m.transpose());
    blk.view_mut((n, n), (n, n)).copy_from(&lp.x);
    Ok(sym(&blk))
}

/// Canonical feasibility test: the linear form in CT, the Schur form in DT.
pub fn feasible(p: &Plant, k_star: &Mat, lp: &LiftedPoint) -> bool {
    match p.time_model {
        TimeModel::Ct => feasible_ineq(p, k_star, lp),
        TimeModel::Dt => feasible_ineq_schur_dt(p, k_star, lp).unwrap_or(false),
    }
}

/// Constraint of the un-lifted problem at `(K, X)`: `A_clX + XA_clᵀ + W`
/// (CT) or `A_clXA_clᵀ − X + W` (DT).
pub fn kx_lhs(p: &Plant, k: &Mat, x: &Mat) -> Result<Mat> {
    let a_cl = closed_loop(p, k)?;
    Ok(sym(&match p.time_model {
        TimeModel::Ct => &a_cl * x + x * a_cl.transpose() + &p.w,
        TimeModel::Dt => &a_cl * x * a_cl.transpose() - x + &p.w,
    }))
}

pub fn feasible_kx(p: &Plant, k: &Mat, x: &Mat) -> bool {
    x_is_pd(x)
        && kx_lhs(p, k, x)
            .map(|l| lambda_max(&l) <= feas_scale(p))
            .unwrap_or(false)
}

/// `X_K + t·Z`, where `Z` solves the closed-loop Lyapunov equation with
/// weight `dw ⪰ 0`. The result satisfies the inequality with slack `t·dw`.
pub fn inflate(p: &Plant, k: &Mat, t: f64, dw: &Mat) -> Result<Mat> {
    if t < 0.0 {
        return Err(LqrError::Input("inflation must be nonnegative".into()));
    }
    let a_cl = closed_loop(p, k)?;
    let x_k = solve_lyapunov(&a_cl, &p.w, p.time_model)?;
    let z = solve_lyapunov(&a_cl, dw, p.time_model)?;
    Ok(sym(&(x_k.x + z.x * t)))
}

/// `(∇J(K) X_K⁻¹, (K* − K)ᵀ ∇J(K) X_K⁻¹)`.
pub fn subgradient_from_gradient(
    p: &Plant,
    k: &Mat,
    ric: &RiccatiSolution,
) -> Result<Subgradient> {
    let ev = evaluate(p, k)?;
    let x_inv = inv_spd(&ev.x_k.x).map_err(|e| LqrError::Degeneracy(e.to_string()))?;
    let h1 = &ev.grad * x_inv;
    let h2 = (&ric.k_star - k).transpose() * &h1;
    Ok(Subgradient { h1, h2 })
}

/// The same element assembled as `Γᵀ [vec ∇J; 0]`.
pub fn subgradient_chain_rule(
    p: &Plant,
    k: &Mat,
    ric: &RiccatiSolution,
) -> Result<Subgradient> {
    let ev = evaluate(p, k)?;
    let lp = upsilon(k, &ev.x_k.x, &ric.k_star)
        .map_err(|e| LqrError::Degeneracy(e.to_string()))?;
    let jac = jacobian_gamma(&lp)?;
    let (m, n) = (p.m(), p.n());
    let mut rhs = nalgebra::DVector::zeros(m * n + n * n);
    rhs.rows_mut(0, m * n).copy_from(&vec(&ev.grad));
    let h = jac.gamma.transpose() * rhs;
    Ok(Subgradient {
        h1: Mat::from_column_slice(m, n, h.rows(0, m * n).as_slice()),
        h2: Mat::from_column_slice(n, n, h.rows(m * n, n * n).as_slice()),
    })
}

/// `Γ(Y, X) = [[X⁻¹ ⊗ I_m, −(X⁻¹ ⊗ YX⁻¹)], [0, I_{n²}]]`.
pub fn jacobian_gamma(lp: &LiftedPoint) -> Result<JacobianGamma> {
    let x_inv = require_pd(&lp.x)?;
    let (m, n) = (lp.y.nrows(), lp.y.ncols());
    if lp.x.nrows() != n {
        return Err(LqrError::Dimension(format!(
            "Y is {m}x{n} but X is {}x{}",
            lp.x.nrows(),
            lp.x.ncols()
        )));
    }
    let (mn, nn) = (m * n, n * n);
    let mut g = Mat::zeros(mn + nn, mn + nn);
    g.view_mut((0, 0), (mn, mn))
        .copy_from(&kron(&x_inv, &Mat::identity(m, m)));
    g.view_mut((0, mn), (mn, nn))
        .copy_from(&(-kron(&x_inv, &(&lp.y * &x_inv))));
    g.view_mut((mn, mn), (nn, nn)).fill_with_identity();
    Ok(JacobianGamma { gamma: g, m, n })
}

/// Minimum margin over a batch, with the count of margins below `−tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub count: usize,
    pub min_margin: f64,
    /// Smallest `margin / tol` ratio seen.
    pub worst_relative: f64,
    pub violations: usize,
}

impl MarginReport {
    fn new() -> Self {
        MarginReport {
            count: 0,
            min_margin: f64::INFINITY,
            worst_relative: f64::INFINITY,
            violations: 0,
        }
    }

    fn push(&mut self, margin: f64, tol: f64) {
        self.count += 1;
        self.min_margin = self.min_margin.min(margin);
        self.worst_relative = self.worst_relative.min(margin / tol);
        if margin < -tol {
            self.violations += 1;
        }
    }

    pub fn passes(&self) -> bool {
        self.violations == 0
    }
}

/// `f_cvx(Y, X) − J* − ⟨R, YX⁻¹Yᵀ⟩ ≥ 0` on feasible samples. Infeasible
/// samples are an error.
pub fn check_partial_qg(
    p: &Plant,
    ric: &RiccatiSolution,
    samples: &[LiftedPoint],
) -> Result<MarginReport> {
    let mut rep = MarginReport::new();
    for lp in samples {
        if !feasible(p, &ric.k_star, lp) {
            return Err(LqrError::Contract("sample is not feasible".into()));
        }
        let f = f_cvx(lp, p, &ric.k_star)?;
        let quad = inner(&p.r, &inv_quad(&lp.y, &lp.x)?);
        rep.push(f - ric.j_star - quad, SLACK * (1.0 + f.abs()));
    }
    Ok(rep)
}

/// Convex-subgradient inequality at the lift of a stabilizing `K`:
/// `f(probe) − f(base) − ⟨H₁, ΔY⟩ − ⟨H₂, ΔX⟩ ≥ 0`.
pub fn check_subgradient_ineq(
    p: &Plant,
    ric: &RiccatiSolution,
    k: &Mat,
    probes: &[LiftedPoint],
) -> Result<MarginReport> {
    let ev = evaluate(p, k)?;
    let base = upsilon(k, &ev.x_k.x, &ric.k_star)?;
    let h = subgradient_from_gradient(p, k, ric)?;
    let f0 = f_cvx(&base, p, &ric.k_star)?;
    let mut rep = MarginReport::new();
    for lp in probes {
        if !feasible(p, &ric.k_star, lp) {
            return Err(LqrError::Contract("probe is not feasible".into()));
        }
        let f = f_cvx(lp, p, &ric.k_star)?;
        let lin = inner(&h.h1, &(&lp.y - &base.y)) + inner(&h.h2, &(&lp.x - &base.x));
        rep.push(f - f0 - lin, SLACK * (1.0 + f.abs().max(f0.abs())));
    }
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub points: usize,
    pub infeasible: usize,
    /// `min(chord − f)` over interior points.
    pub min_chord_margin: f64,
    pub chord_violations: usize,
}

impl SegmentReport {
    pub fn passes(&self) -> bool {
        self.infeasible == 0 && self.chord_violations == 0
    }
}

/// Feasibility and chord test at `steps − 1` interior points of the segment.
pub fn check_segment_convexity(
    p: &Plant,
    k_star: &Mat,
    p1: &LiftedPoint,
    p2: &LiftedPoint,
    steps: usize,
) -> Result<SegmentReport> {
    if steps < 2 {
        return Err(LqrError::Input("segment needs at least 2 steps".into()));
    }
    if !feasible(p, k_star, p1) || !feasible(p, k_star, p2) {
        return Err(LqrError::Contract("segment endpoint is not feasible".into()));
    }
    let f1 = f_cvx(p1, p, k_star)?;
    let f2 = f_cvx(p2, p, k_star)?;
    let mut rep = SegmentReport {
        points: 0,
        infeasible: 0,
        min_chord_margin: f64::INFINITY,
        chord_violations: 0,
    };
    for i in 1..steps {
        let t = i as f64 / steps as f64;
        let lp = p1.lerp(p2, t);
        rep.points += 1;
        if !feasible(p, k_star, &lp) {
            rep.infeasible += 1;
            continue;
        }
        let chord = (1.0 - t) * f1 + t * f2;
        let margin = chord - f_cvx(&lp, p, k_star)?;
        rep.min_chord_margin = rep.min_chord_margin.min(margin);
        if margin < -SLACK * (1.0 + chord.abs()) {
            rep.chord_violations += 1;
        }
    }
    Ok(rep)
}

/// One feasible pair of the inequality problem, `X = X_K + t·Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct InflatedSample {
    pub k: Mat,
    pub t: f64,
    pub x: Mat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCheck {
    /// `⟨Q + KᵀRK, X⟩ − J(K)` over all samples.
    pub margins: MarginReport,
    /// Gains whose smallest lifted cost did not occur at `t = 0`.
    pub minimum_not_at_equality: usize,
    pub gains: usize,
}

impl EquivalenceCheck {
    pub fn passes(&self) -> bool {
        self.margins.passes() && self.minimum_not_at_equality == 0
    }
}

/// Compares the inequality-relaxed cost with `J(K)` on inflated samples,
/// and checks that for each gain the minimum is at the equality solution.
pub fn check_equivalence_eq_vs_ineq(
    p: &Plant,
    samples: &[InflatedSample],
) -> Result<EquivalenceCheck> {
    let mut rep = MarginReport::new();
    let mut best: Vec<(Mat, f64, f64)> = Vec::new();
    for s in samples {
        if !feasible_kx(p, &s.k, &s.x) {
            return Err(LqrError::Contract("inflated sample is not feasible".into()));
        }
        let j = crate::lqr::cost(p, &s.k)?;
        let val = inner(&stage_weight(p, &s.k), &s.x);
        rep.push(val - j, SLACK * (1.0 + j.abs()));
        match best.iter_mut().find(|(k, _, _)| k == &s.k) {
            Some(entry) => {
                if val < entry.2 || (val == entry.2 && s.t < entry.1) {
                    entry.1 = s.t;
                    entry.2 = val;
                }
            }
            None => best.push((s.k.clone(), s.t, val)),
        }
    }
    Ok(EquivalenceCheck {
        margins: rep,
        minimum_not_at_equality: best.iter().filter(|(_, t, _)| *t != 0.0).count(),
        gains: best.len(),
    })
}
