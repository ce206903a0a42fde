//! Exact-gradient policy descent `K⁺ = K − η∇J(K)` with Armijo
//! backtracking, and a log-linear rate fit of the optimality gap.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::lqr::{evaluate, PolicyEval};
use crate::lyapunov::solve_lyapunov;
use crate::matrixkit::{inner, Mat};
use crate::systems::{closed_loop, is_in_k, Plant, TimeModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    /// Initial trial step of every iteration.
    pub step: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    /// Absolute gradient tolerance; `None` means `1e-10·(1 + ‖∇J(K₀)‖_F)`.
    pub tol_grad: Option<f64>,
    pub max_iter: usize,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            step: 1.0,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
            tol_grad: None,
            max_iter: 100_000,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step > 0.0
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.tol_grad.is_none_or(|t| t >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(LqrError::Input(format!("invalid descent configuration {self:?}")))
        }
    }
}

/// One row of the trace. `step` is the step that produced the *next*
/// iterate (zero on the last row); `decrease` is `J(K_next) − J(K)`
/// evaluated with the cost-difference identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    #[serde(with = "crate::matrixkit::rows")]
    pub k: Mat,
    pub j: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub decrease: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentTrace {
    pub iterates: Vec<Iterate>,
    pub converged: bool,
    /// Per-iteration contraction factor of the gap, once a reference
    /// optimum has been supplied through [`DescentTrace::estimate_rate`].
    pub rate_estimate: Option<f64>,
}

impl DescentTrace {
    pub fn last(&self) -> &Iterate {
        self.iterates.last().expect("trace always holds K0")
    }

    pub fn iterations(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn estimate_rate(&mut self, j_star: f64) -> Result<RateFit> {
        let fit = linear_rate_estimate(self, j_star)?;
        self.rate_estimate = Some(fit.contraction);
        Ok(fit)
    }

    /// CSV with header `iter,J,grad_norm,step`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,J,grad_norm,step\n");
        for (i, it) in self.iterates.iter().enumerate() {
            let _ = writeln!(
                s,
                "{i},{:.16e},{:.16e},{:.16e}",
                it.j, it.grad_norm, it.step
            );
        }
        s
    }
}

/// `J(K') − J(K)` from the solution of the dual equation at `K` and the
/// Lyapunov variable at `K'`:
/// `⟨X_{K'}, ΔᵀSΔ + ΔᵀE + EᵀΔ⟩` with `Δ = K' − K`, where `S = R`,
/// `E = RK + BᵀP_K` (CT) or `S = R + BᵀP_KB`, `E = SK + BᵀP_KA` (DT).
///
/// Unlike subtracting two costs, this keeps full relative accuracy when
/// the difference is tiny.
pub fn cost_difference(p: &Plant, at: &PolicyEval, x_next: &Mat, k_next: &Mat) -> f64 {
    let bt = p.b.transpose();
    let (s, e) = match p.time_model {
        TimeModel::Ct => (p.r.clone(), &p.r * &at.k + &bt * &at.p_k.x),
        TimeModel::Dt => {
            let s = &p.r + &bt * &at.p_k.x * &p.b;
            let e = &s * &at.k + &bt * &at.p_k.x * &p.a;
            (s, e)
        }
    };
    let d = k_next - &at.k;
    let m = d.transpose() * &s * &d + d.transpose() * &e + e.transpose() * &d;
    inner(&m, x_next)
}

/// Gradient descent with Armijo backtracking. Trial gains outside the
/// stabilizing set count as failed decrease.
pub fn gradient_descent(p: &Plant, k0: &Mat, cfg: &DescentConfig) -> Result<DescentTrace> {
    cfg.validate()?;
    p.check_gain(k0)?;
    if !is_in_k(p, k0)? {
        return Err(LqrError::Stability("initial gain is not stabilizing".into()));
    }
    let mut ev = evaluate(p, k0)?;
    let tol = cfg
        .tol_grad
        .unwrap_or_else(|| 1e-10 * (1.0 + ev.grad_norm()));
    let mut iterates = Vec::new();
    let mut converged = false;
    for _ in 0..=cfg.max_iter {
        let g_norm = ev.grad_norm();
        if g_norm <= tol {
            converged = true;
            break;
        }
        if iterates.len() == cfg.max_iter {
            break;
        }
        let g2 = g_norm * g_norm;
        let mut eta = cfg.step;
        let (k_next, decrease) = loop {
            if eta < 1e-16 {
                return Err(LqrError::Stall(format!(
                    "no Armijo step above 1e-16 at iteration {} (grad norm {g_norm:.3e})",
                    iterates.len()
                )));
            }
            let trial = &ev.k - &ev.grad * eta;
            if is_in_k(p, &trial)? {
                let a_cl = closed_loop(p, &trial)?;
                if let Ok(x) = solve_lyapunov(&a_cl, &p.w, p.time_model) {
                    let diff = cost_difference(p, &ev, &x.x, &trial);
                    if diff <= -cfg.armijo_c * eta * g2 {
                        break (trial, diff);
                    }
                }
            }
            eta *= cfg.backtrack_factor;
        };
        iterates.push(Iterate {
            k: ev.k.clone(),
            j: ev.j,
            grad_norm: g_norm,
            step: eta,
            decrease,
        });
        ev = evaluate(p, &k_next)?;
    }
    iterates.push(Iterate {
        k: ev.k.clone(),
        j: ev.j,
        grad_norm: ev.grad_norm(),
        step: 0.0,
        decrease: 0.0,
    });
    Ok(DescentTrace {
        iterates,
        converged,
        rate_estimate: None,
    })
}

/// Least-squares fit of `log(J_l − J*)` against `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `exp(slope)`.
    pub contraction: f64,
    pub points: usize,
}

/// Smallest gap that enters the fit.
pub const RATE_GAP_FLOOR: f64 = 1e-12;

/// Fits the final 80% of iterates whose gap exceeds [`RATE_GAP_FLOOR`];
/// needs at least ten of them.
pub fn linear_rate_estimate(trace: &DescentTrace, j_star: f64) -> Result<RateFit> {
    let pts: Vec<(f64, f64)> = trace
        .iterates
        .iter()
        .enumerate()
        .filter(|(_, it)| it.j - j_star > RATE_GAP_FLOOR)
        .map(|(i, it)| (i as f64, (it.j - j_star).ln()))
        .collect();
    // drop the initial transient: fit the final 80%
    fit_log_linear(&pts[pts.len() / 5..])
}

/// Ordinary least squares on `(x, y)` points.
pub fn fit_log_linear(pts: &[(f64, f64)]) -> Result<RateFit> {
    if pts.len() < 10 {
        return Err(LqrError::Data(format!(
            "need at least 10 iterates with positive gap, have {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        contraction: slope.exp(),
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{self, ExampleId};
    use crate::lqr::cost;
    use crate::riccati;
    use approx::assert_relative_eq;

    fn s(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    #[test]
    fn scalar_fixed_step_converges() {
        let p = builtin::plant(ExampleId::Ex41Ct).unwrap();
        let cfg = DescentConfig {
            step: 0.1,
            ..DescentConfig::default()
        };
        let trace = gradient_descent(&p, &s(-2.0), &cfg).unwrap();
        assert!(trace.converged);
        assert_relative_eq!(trace.last().k[(0, 0)], -1.0, epsilon = 1e-8);
        assert_relative_eq!(trace.last().j, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn start_at_optimum() {
        let p = builtin::plant(ExampleId::Ex32).unwrap();
        let ric = riccati::solve(&p).unwrap();
        let cfg = DescentConfig {
            tol_grad: Some(1e-8),
            ..DescentConfig::default()
        };
        let trace = gradient_descent(&p, &ric.k_star, &cfg).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.iterations(), 0);
    }

    #[test]
    fn unstable_start_rejected() {
        let p = builtin::plant(ExampleId::Ex41Dt).unwrap();
        assert!(matches!(
            gradient_descent(&p, &s(0.5), &DescentConfig::default()),
            Err(LqrError::Stability(_))
        ));
    }

    #[test]
    fn cost_difference_matches_direct() {
        for id in [ExampleId::Ex31, ExampleId::Ex33] {
            let p = builtin::plant(id).unwrap();
            let ric = riccati::solve(&p).unwrap();
            let k = &ric.k_star + Mat::from_row_slice(1, 2, &[0.05, -0.03]);
            let k2 = &ric.k_star + Mat::from_row_slice(1, 2, &[-0.02, 0.04]);
            let ev = evaluate(&p, &k).unwrap();
            let x2 = solve_lyapunov(&closed_loop(&p, &k2).unwrap(), &p.w, p.time_model).unwrap();
            let d = cost_difference(&p, &ev, &x2.x, &k2);
            let direct = cost(&p, &k2).unwrap() - cost(&p, &k).unwrap();
            assert_relative_eq!(d, direct, max_relative = 1e-9);
        }
    }

    #[test]
    fn rate_fit_needs_data() {
        let trace = DescentTrace {
            iterates: vec![],
            converged: true,
            rate_estimate: None,
        };
        assert!(matches!(linear_rate_estimate(&trace, 0.0), Err(LqrError::Data(_))));
    }

    #[test]
    fn rate_fit_exact_geometric() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 0.5f64.powi(i).ln())).collect();
        let fit = fit_log_linear(&pts).unwrap();
        assert_relative_eq!(fit.contraction, 0.5, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn csv_header() {
        let p = builtin::plant(ExampleId::Ex41Ct).unwrap();
        let trace = gradient_descent(&p, &s(-2.0), &DescentConfig::default()).unwrap();
        let csv = trace.to_csv();
        assert!(csv.starts_with("iter,J,grad_norm,step\n"));
        assert_eq!(csv.lines().count(), trace.iterates.len() + 1);
    }
}
