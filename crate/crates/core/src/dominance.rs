//! Pointwise and sampled certification of the optimality-gap bounds
//!
//! * lower: `J − J* ≥ ⟨R, (K−K*) X_K (K−K*)ᵀ⟩`
//! * upper: `J − J* ≤ ⟨∇J X_K⁻¹ X*, K−K*⟩`
//! * error bound: `‖K−K*‖_F ≤ λ_max(X*) / (λ_min(R) λ_min(X_K)²) ‖∇J‖_F`
//! * gradient dominance: `μ_K (J − J*) ≤ ‖∇J‖²_F`
//!
//! Margins are signed (`≥ 0` means the inequality holds) and compared
//! against the relative slack `1e-9·(1 + scale)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::lqr::{cost, evaluate, lyapunov_variable, mu_of_k};
use crate::lyapunov::solve_lyapunov_unrestricted;
use crate::matrixkit::{default_tol, inner, inv_spd, is_pd, lambda_max, lambda_min, Mat};
use crate::optimize::{gradient_descent, DescentConfig};
use crate::riccati::RiccatiSolution;
use crate::sampling::{self, SamplerConfig};
use crate::systems::{
    check_assumption22_sufficient, closed_loop, is_in_k, stability_degree, Plant, TimeModel,
};

/// Relative slack shared by every inequality check.
pub const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    #[serde(with = "crate::matrixkit::rows")]
    pub k: Mat,
    pub j: f64,
    pub j_star: f64,
    pub gap: f64,
    pub grad_norm_sq: f64,
    /// Spectral radius (DT) or abscissa (CT) of the closed loop.
    pub stability_degree: f64,
    pub min_eig_x: f64,
    pub mu_k: Option<f64>,
    /// `‖∇J‖² − μ_K·gap`; absent when `X_K` is singular.
    pub pl_margin: Option<f64>,
    pub lower_bound_margin: f64,
    pub upper_bound_margin: Option<f64>,
    pub error_bound_margin: Option<f64>,
}

impl DominanceReport {
    /// `1e-9·(1 + |J|)`.
    pub fn tol(&self) -> f64 {
        SLACK * (1.0 + self.j.abs())
    }

    /// Slack for the gradient-dominance margin, `1e-9·(1 + ‖∇J‖²)`.
    pub fn pl_tol(&self) -> f64 {
        SLACK * (1.0 + self.grad_norm_sq)
    }

    pub fn lower_ok(&self) -> bool {
        self.lower_bound_margin >= -self.tol()
    }

    pub fn upper_ok(&self) -> bool {
        self.upper_bound_margin.is_none_or(|m| m >= -self.tol())
    }

    pub fn error_bound_ok(&self) -> bool {
        self.error_bound_margin.is_none_or(|m| m >= -self.tol())
    }

    pub fn pl_ok(&self) -> bool {
        self.pl_margin.is_none_or(|m| m >= -self.pl_tol())
    }

    /// Every evaluated inequality holds within its slack.
    pub fn passes(&self) -> bool {
        self.gap >= -SLACK * (1.0 + self.j_star.abs())
            && self.lower_ok()
            && self.upper_ok()
            && self.error_bound_ok()
            && self.pl_ok()
    }
}

/// Certifies the inequalities at one stabilizing gain. When `X_K` is
/// singular only the lower bound is evaluated.
pub fn certify_point(p: &Plant, k: &Mat, ric: &RiccatiSolution) -> Result<DominanceReport> {
    let ev = evaluate(p, k)?;
    let dk = k - &ric.k_star;
    let gap = ev.j - ric.j_star;
    let grad_norm_sq = ev.grad.norm_squared();
    let lower = inner(&p.r, &(&dk * &ev.x_k.x * dk.transpose()));
    let lower_bound_margin = gap - lower;
    let mut report = DominanceReport {
        k: k.clone(),
        j: ev.j,
        j_star: ric.j_star,
        gap,
        grad_norm_sq,
        stability_degree: stability_degree(p, k)?,
        min_eig_x: ev.x_k.min_eig,
        mu_k: None,
        pl_margin: None,
        lower_bound_margin,
        upper_bound_margin: None,
        error_bound_margin: None,
    };
    if !ev.x_k.pd {
        return Ok(report);
    }
    let x_inv = match inv_spd(&ev.x_k.x) {
        Ok(x) => x,
        Err(_) => return Ok(report),
    };
    let upper = inner(&(&ev.grad * x_inv * &ric.x_star), &dk);
    let lmin_x = lambda_min(&ev.x_k.x);
    let lmax_xs = lambda_max(&ric.x_star);
    let lmin_r = lambda_min(&p.r);
    let mu = lmin_r * lmin_x.powi(3) / lmax_xs.powi(2);
    let err_rhs = lmax_xs / (lmin_r * lmin_x * lmin_x) * grad_norm_sq.sqrt();
    report.mu_k = Some(mu);
    report.upper_bound_margin = Some(upper - gap);
    report.error_bound_margin = Some(err_rhs - dk.norm());
    report.pl_margin = Some(grad_norm_sq - mu * gap);
    Ok(report)
}

/// Certifies a batch of gains in parallel; output order follows input.
pub fn certify_samples(
    p: &Plant,
    ric: &RiccatiSolution,
    gains: &[Mat],
) -> Result<Vec<DominanceReport>> {
    gains
        .par_iter()
        .map(|k| certify_point(p, k, ric))
        .collect()
}

/// Min and median of one margin column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginStats {
    pub count: usize,
    pub min: f64,
    pub median: f64,
    pub violations: usize,
}

impl MarginStats {
    fn from_pairs(pairs: impl Iterator<Item = (f64, f64)>) -> Option<Self> {
        let mut vals = Vec::new();
        let mut violations = 0;
        for (m, tol) in pairs {
            if m < -tol {
                violations += 1;
            }
            vals.push(m);
        }
        if vals.is_empty() {
            return None;
        }
        vals.sort_by(f64::total_cmp);
        let mid = vals.len() / 2;
        let median = if vals.len() % 2 == 1 {
            vals[mid]
        } else {
            0.5 * (vals[mid - 1] + vals[mid])
        };
        Some(MarginStats {
            count: vals.len(),
            min: vals[0],
            median,
            violations,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationSummary {
    pub samples: usize,
    pub pd_samples: usize,
    pub lower_bound: Option<MarginStats>,
    pub upper_bound: Option<MarginStats>,
    pub error_bound: Option<MarginStats>,
    pub pl: Option<MarginStats>,
    pub mu_inf: Option<f64>,
    pub all_pass: bool,
}

/// Aggregates a batch of reports into min/median margins and `inf μ_K`.
pub fn summarize(reports: &[DominanceReport]) -> CertificationSummary {
    let lower = MarginStats::from_pairs(reports.iter().map(|r| (r.lower_bound_margin, r.tol())));
    let upper = MarginStats::from_pairs(
        reports
            .iter()
            .filter_map(|r| r.upper_bound_margin.map(|m| (m, r.tol()))),
    );
    let error = MarginStats::from_pairs(
        reports
            .iter()
            .filter_map(|r| r.error_bound_margin.map(|m| (m, r.tol()))),
    );
    let pl = MarginStats::from_pairs(
        reports
            .iter()
            .filter_map(|r| r.pl_margin.map(|m| (m, r.pl_tol()))),
    );
    let mu_inf = reports
        .iter()
        .filter_map(|r| r.mu_k)
        .min_by(f64::total_cmp);
    CertificationSummary {
        samples: reports.len(),
        pd_samples: reports.iter().filter(|r| r.mu_k.is_some()).count(),
        lower_bound: lower,
        upper_bound: upper,
        error_bound: error,
        pl,
        mu_inf,
        all_pass: reports.iter().all(DominanceReport::passes),
    }
}

/// Region over which a uniform constant was estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// `{K ∈ 𝒦 : J(K) ≤ ν}`.
    Sublevel { nu: f64 },
    /// `{K ∈ 𝒦 : ‖K − K*‖_∞ ≤ half_width}` (entrywise max norm).
    Box { half_width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformMuEstimate {
    pub region: Region,
    /// Empirical infimum of `μ_K` over accepted samples.
    pub mu_inf: f64,
    pub sample_count: usize,
    /// Smallest `λ_min(X_K)` seen, the surrogate for the compact-set
    /// lower bound on the Lyapunov variable.
    pub min_lambda_x: f64,
}

fn mu_over(
    p: &Plant,
    ric: &RiccatiSolution,
    region: Region,
    gains: impl Iterator<Item = Mat>,
) -> Result<UniformMuEstimate> {
    let mut mu_inf = f64::INFINITY;
    let mut min_lambda_x = f64::INFINITY;
    let mut count = 0;
    for k in gains {
        let x = lyapunov_variable(p, &k)?;
        if !x.pd {
            return Err(LqrError::Degeneracy(
                "sampled gain has a singular Lyapunov variable".into(),
            ));
        }
        mu_inf = mu_inf.min(mu_of_k(p, &k, ric)?);
        min_lambda_x = min_lambda_x.min(x.min_eig);
        count += 1;
    }
    if count == 0 {
        return Err(LqrError::Sampling("no sample fell inside the region".into()));
    }
    Ok(UniformMuEstimate {
        region,
        mu_inf,
        sample_count: count,
        min_lambda_x,
    })
}

/// Empirical uniform constant over the sublevel set `J(K) ≤ ν`, by
/// rejection sampling around `K*`. `K*` itself is always included.
pub fn uniform_mu_sublevel(
    p: &Plant,
    ric: &RiccatiSolution,
    nu: f64,
    cfg: &SamplerConfig,
) -> Result<UniformMuEstimate> {
    if nu < ric.j_star - SLACK * (1.0 + ric.j_star.abs()) {
        return Err(LqrError::Input(format!(
            "sublevel value {nu} is below the optimal cost {}",
            ric.j_star
        )));
    }
    let candidates = sampling::stabilizing_gains(p, &ric.k_star, cfg)?;
    let mut accepted = vec![ric.k_star.clone()];
    for k in candidates {
        if cost(p, &k)? <= nu {
            accepted.push(k);
        }
    }
    mu_over(p, ric, Region::Sublevel { nu }, accepted.into_iter())
}

/// Empirical uniform constant over `‖K − K*‖_∞ ≤ half_width` intersected
/// with the stabilizing set, on a regular grid with `per_axis` points per
/// entry (`per_axis^{mn}` gains).
pub fn uniform_mu_box(
    p: &Plant,
    ric: &RiccatiSolution,
    half_width: f64,
    per_axis: usize,
) -> Result<UniformMuEstimate> {
    if per_axis < 2 {
        return Err(LqrError::Input("box grid needs at least 2 points per axis".into()));
    }
    let dims = p.m() * p.n();
    let total = per_axis.checked_pow(dims as u32).unwrap_or(usize::MAX);
    if total > 5_000_000 {
        return Err(LqrError::UnsupportedDimension(format!(
            "box grid would have {total} points"
        )));
    }
    let mut gains = Vec::new();
    for idx in 0..total {
        let mut k = ric.k_star.clone();
        let mut rem = idx;
        for e in 0..dims {
            let i = rem % per_axis;
            rem /= per_axis;
            let t = -1.0 + 2.0 * i as f64 / (per_axis - 1) as f64;
            k[e] += half_width * t;
        }
        if is_in_k(p, &k)? {
            gains.push(k);
        }
    }
    mu_over(p, ric, Region::Box { half_width }, gains.into_iter())
}

/// Closed-form global constant for DT plants with `W ≻ 0`:
/// `λ_min(R) λ_min(W)³ / λ_max(X*)²`.
pub fn global_mu_dt(p: &Plant, ric: &RiccatiSolution) -> Result<f64> {
    if p.time_model != TimeModel::Dt {
        return Err(LqrError::Inapplicable(
            "the global constant exists only in discrete time".into(),
        ));
    }
    if !is_pd(&p.w, default_tol(&p.w)) {
        return Err(LqrError::Inapplicable("W is singular".into()));
    }
    Ok(lambda_min(&p.r) * lambda_min(&p.w).powi(3) / lambda_max(&ric.x_star).powi(2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// One of the sufficient conditions held for the plant.
    pub precondition_holds: bool,
    pub samples: usize,
    pub stabilizing: usize,
    pub non_stabilizing: usize,
    /// Samples whose Kronecker operator was numerically singular.
    pub skipped_singular: usize,
    pub mismatches: usize,
}

/// Compares `K ∈ 𝒦` against `X_K ≻ 0` (unrestricted Lyapunov solve) on
/// the given gains.
pub fn verify_assumption22_equivalence(p: &Plant, gains: &[Mat]) -> Result<EquivalenceReport> {
    let structure = check_assumption22_sufficient(p)?;
    let outcomes: Vec<Option<(bool, bool)>> = gains
        .par_iter()
        .map(|k| -> Result<Option<(bool, bool)>> {
            let a_cl = closed_loop(p, k)?;
            let stab = is_in_k(p, k)?;
            match solve_lyapunov_unrestricted(&a_cl, &p.w, p.time_model) {
                Ok(cert) => Ok(Some((stab, cert.pd))),
                Err(LqrError::Singular(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut rep = EquivalenceReport {
        precondition_holds: structure.standing_assumption()
            && structure.pd_equivalence_sufficient(),
        samples: gains.len(),
        stabilizing: 0,
        non_stabilizing: 0,
        skipped_singular: 0,
        mismatches: 0,
    };
    for o in outcomes {
        match o {
            None => rep.skipped_singular += 1,
            Some((stab, pd)) => {
                if stab {
                    rep.stabilizing += 1;
                } else {
                    rep.non_stabilizing += 1;
                }
                if stab != pd {
                    rep.mismatches += 1;
                }
            }
        }
    }
    Ok(rep)
}

/// Seeded variant drawing gains around `center` at radii from
/// `radius_min` to `radius_max` (relative to `1 + ‖center‖`).
pub fn verify_assumption22_sampled(
    p: &Plant,
    center: &Mat,
    cfg: &SamplerConfig,
) -> Result<EquivalenceReport> {
    verify_assumption22_equivalence(p, &sampling::unrestricted_gains(center, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatProbeReport {
    pub starts: usize,
    /// Terminal gains with `|J − J*| ≤ 1e-8·(1 + J*)` and
    /// `‖∇J‖_F ≤ 1e-6`.
    #[serde(with = "mat_list")]
    pub optimal_terminals: Vec<Mat>,
    pub terminal_costs: Vec<f64>,
    /// Largest pairwise Frobenius distance among optimal terminals.
    pub max_pairwise_distance: f64,
}

mod mat_list {
    use crate::matrixkit::{from_rows, to_rows, Mat};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Mat], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Mat>, D::Error> {
        Vec::<Vec<Vec<f64>>>::deserialize(d)?
            .iter()
            .map(|r| from_rows(r).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Gradient descent from each start; collects the terminal gains that are
/// optimal to tolerance and their spread. A spread above zero shows the
/// optimum is not unique.
pub fn flat_direction_probe(
    p: &Plant,
    ric: &RiccatiSolution,
    starts: &[Mat],
    cfg: &DescentConfig,
) -> Result<FlatProbeReport> {
    let traces = starts
        .par_iter()
        .map(|k0| gradient_descent(p, k0, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut optimal = Vec::new();
    let mut costs = Vec::new();
    for t in &traces {
        let last = t.last();
        costs.push(last.j);
        if (last.j - ric.j_star).abs() <= 1e-8 * (1.0 + ric.j_star.abs()) && last.grad_norm <= 1e-6
        {
            optimal.push(last.k.clone());
        }
    }
    let mut spread: f64 = 0.0;
    for i in 0..optimal.len() {
        for j in i + 1..optimal.len() {
            spread = spread.max((&optimal[i] - &optimal[j]).norm());
        }
    }
    Ok(FlatProbeReport {
        starts: starts.len(),
        optimal_terminals: optimal,
        terminal_costs: costs,
        max_pairwise_distance: spread,
    })
}
