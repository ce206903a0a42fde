//! Plant data, the block operator that unifies the two Lyapunov forms,
//! stabilizing-set membership, and structural (rank) checks.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::matrixkit::{
    self, default_tol, eigvals, from_rows, is_pd, is_psd, rank, rank_complex, spectral_norm,
    sqrt_psd, sym_eig, to_complex, to_rows, CMat, Mat, C64,
};

/// Margin keeping the stabilizing sets open: boundary gains are rejected.
pub const STAB_MARGIN: f64 = 1e-9;

/// Relative tolerance for numerical rank decisions.
pub const RANK_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeModel {
    /// Continuous time, `ẋ = Ax + Bu`.
    Ct,
    /// Discrete time, `x⁺ = Ax + Bu`.
    Dt,
}

impl fmt::Display for TimeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeModel::Ct => f.write_str("ct"),
            TimeModel::Dt => f.write_str("dt"),
        }
    }
}

/// LQR problem data. `w` is the initial-state covariance `E[x₀x₀ᵀ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub a: Mat,
    pub b: Mat,
    pub q: Mat,
    pub r: Mat,
    pub w: Mat,
    pub time_model: TimeModel,
}

/// JSON wire format: row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantJson {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub time_model: TimeModel,
}

fn check_symmetric(m: &Mat, name: &str) -> Result<()> {
    let asym = (m - m.transpose()).norm();
    if asym > 1e-12 * m.norm().max(1.0) {
        return Err(LqrError::Input(format!("{name} is not symmetric")));
    }
    Ok(())
}

impl Plant {
    /// Validates dimensions and the weight/covariance definiteness
    /// requirements: `Q ⪰ 0, Q ≠ 0`, `R ≻ 0`, `W ⪰ 0, W ≠ 0`.
    pub fn new(a: Mat, b: Mat, q: Mat, r: Mat, w: Mat, time_model: TimeModel) -> Result<Self> {
        let a = matrixkit::checked(a)?;
        let b = matrixkit::checked(b)?;
        let q = matrixkit::checked(q)?;
        let r = matrixkit::checked(r)?;
        let w = matrixkit::checked(w)?;
        let n = a.nrows();
        let m = b.ncols();
        let dims = [
            ("A", &a, n, n),
            ("B", &b, n, m),
            ("Q", &q, n, n),
            ("R", &r, m, m),
            ("W", &w, n, n),
        ];
        for (name, mat, rr, cc) in dims {
            if mat.nrows() != rr || mat.ncols() != cc {
                return Err(LqrError::Dimension(format!(
                    "{name} is {}x{}, expected {rr}x{cc}",
                    mat.nrows(),
                    mat.ncols()
                )));
            }
        }
        check_symmetric(&q, "Q")?;
        check_symmetric(&r, "R")?;
        check_symmetric(&w, "W")?;
        if !is_psd(&q, default_tol(&q)) || q.norm() == 0.0 {
            return Err(LqrError::Input("Q must be PSD and nonzero".into()));
        }
        if !is_pd(&r, 1e-12 * r.norm().max(1.0)) {
            return Err(LqrError::Input("R must be positive definite".into()));
        }
        if !is_psd(&w, default_tol(&w)) || w.norm() == 0.0 {
            return Err(LqrError::Input("W must be PSD and nonzero".into()));
        }
        Ok(Plant {
            a,
            b,
            q: matrixkit::sym(&q),
            r: matrixkit::sym(&r),
            w: matrixkit::sym(&w),
            time_model,
        })
    }

    /// State dimension `n`.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension `m`.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let pj: PlantJson =
            serde_json::from_str(s).map_err(|e| LqrError::Input(format!("plant JSON: {e}")))?;
        Plant::try_from(pj)
    }

    pub fn to_json(&self) -> PlantJson {
        PlantJson {
            a: to_rows(&self.a),
            b: to_rows(&self.b),
            q: to_rows(&self.q),
            r: to_rows(&self.r),
            w: to_rows(&self.w),
            time_model: self.time_model,
        }
    }

    /// Zero gain of the right shape.
    pub fn zero_gain(&self) -> Mat {
        Mat::zeros(self.m(), self.n())
    }

    pub fn check_gain(&self, k: &Mat) -> Result<()> {
        if k.nrows() != self.m() || k.ncols() != self.n() {
            return Err(LqrError::Dimension(format!(
                "gain is {}x{}, expected {}x{}",
                k.nrows(),
                k.ncols(),
                self.m(),
                self.n()
            )));
        }
        Ok(())
    }
}

impl TryFrom<PlantJson> for Plant {
    type Error = LqrError;

    fn try_from(pj: PlantJson) -> Result<Self> {
        Plant::new(
            from_rows(&pj.a)?,
            from_rows(&pj.b)?,
            from_rows(&pj.q)?,
            from_rows(&pj.r)?,
            from_rows(&pj.w)?,
            pj.time_model,
        )
    }
}

/// Tri-state stabilization status of a gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stabilizing {
    Yes,
    No,
    Unknown,
}

/// Feedback gain `u = Kx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gain {
    pub k: Mat,
    pub stabilizing: Stabilizing,
}

impl Gain {
    pub fn unchecked(k: Mat) -> Self {
        Gain {
            k,
            stabilizing: Stabilizing::Unknown,
        }
    }

    /// Classifies `k` against the plant's stabilizing set.
    pub fn classify(p: &Plant, k: Mat) -> Result<Self> {
        let stabilizing = if is_in_k(p, &k)? {
            Stabilizing::Yes
        } else {
            Stabilizing::No
        };
        Ok(Gain { k, stabilizing })
    }
}

/// Structural predicates behind the standing assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureReport {
    pub stabilizable: bool,
    pub detectable: bool,
    pub controllable: bool,
    pub assumption22_w_pd: bool,
    pub assumption22_imb_in_imw: bool,
}

impl StructureReport {
    /// Stabilizability and detectability both hold.
    pub fn standing_assumption(&self) -> bool {
        self.stabilizable && self.detectable
    }

    /// One of the two sufficient conditions for `K ∈ 𝒦 ⇔ X_K ≻ 0` holds.
    pub fn pd_equivalence_sufficient(&self) -> bool {
        self.assumption22_w_pd || (self.controllable && self.assumption22_imb_in_imw)
    }
}

/// Block operator on a symmetric `2n×2n` matrix `[[F, G], [Gᵀ, H]]`:
/// `G + Gᵀ` in continuous time and `F − H` in discrete time.
pub fn psi(block: &Mat, tm: TimeModel) -> Result<Mat> {
    let order = block.nrows();
    if order != block.ncols() || !order.is_multiple_of(2) || order == 0 {
        return Err(LqrError::Contract(format!(
            "block must be square of even order, got {}x{}",
            block.nrows(),
            block.ncols()
        )));
    }
    let asym = (block - block.transpose()).norm();
    if asym > 1e-10 * block.norm().max(1.0) {
        return Err(LqrError::Contract("block argument is not symmetric".into()));
    }
    let n = order / 2;
    Ok(match tm {
        TimeModel::Ct => {
            let g = block.view((0, n), (n, n));
            g + g.transpose()
        }
        TimeModel::Dt => block.view((0, 0), (n, n)) - block.view((n, n), (n, n)),
    })
}

/// Stacks `[A_cl; I] X [A_cl; I]ᵀ`.
pub fn lifted_block(a_cl: &Mat, x: &Mat) -> Mat {
    let n = a_cl.nrows();
    let mut stack = Mat::zeros(2 * n, n);
    stack.view_mut((0, 0), (n, n)).copy_from(a_cl);
    stack.view_mut((n, 0), (n, n)).fill_with_identity();
    matrixkit::sym(&(&stack * x * stack.transpose()))
}

/// `A + BK`.
pub fn closed_loop(p: &Plant, k: &Mat) -> Result<Mat> {
    p.check_gain(k)?;
    Ok(&p.a + &p.b * k)
}

/// Stability of a matrix for the given time model, with [`STAB_MARGIN`].
pub fn is_stable(a_cl: &Mat, tm: TimeModel) -> Result<bool> {
    let spec = eigvals(a_cl)?;
    Ok(match tm {
        TimeModel::Ct => spec.abscissa() < -STAB_MARGIN,
        TimeModel::Dt => spec.spectral_radius() < 1.0 - STAB_MARGIN,
    })
}

/// Membership of `K` in the (open) stabilizing set.
pub fn is_in_k(p: &Plant, k: &Mat) -> Result<bool> {
    is_stable(&closed_loop(p, k)?, p.time_model)
}

/// Stability degree used by samplers: spectral abscissa (CT) or spectral
/// radius (DT) of `A + BK`.
pub fn stability_degree(p: &Plant, k: &Mat) -> Result<f64> {
    let spec = eigvals(&closed_loop(p, k)?)?;
    Ok(match p.time_model {
        TimeModel::Ct => spec.abscissa(),
        TimeModel::Dt => spec.spectral_radius(),
    })
}

fn not_certified_stable(z: &C64, tm: TimeModel) -> bool {
    match tm {
        TimeModel::Ct => z.re >= -STAB_MARGIN,
        TimeModel::Dt => z.norm() >= 1.0 - STAB_MARGIN,
    }
}

/// PBH test: every mode not certified stable must satisfy
/// `rank [λI − M, N] = n`.
fn pbh(m: &Mat, n_mat: &Mat, tm: TimeModel) -> Result<bool> {
    let n = m.nrows();
    let mut joined = Mat::zeros(n, n + n_mat.ncols());
    joined.view_mut((0, 0), (n, n)).copy_from(m);
    joined.view_mut((0, n), (n, n_mat.ncols())).copy_from(n_mat);
    let tol = RANK_RTOL * spectral_norm(&joined).max(f64::MIN_POSITIVE);
    for lambda in eigvals(m)?.iter().filter(|z| not_certified_stable(z, tm)) {
        let mut test = CMat::zeros(n, n + n_mat.ncols());
        let shifted = CMat::identity(n, n) * *lambda - to_complex(m);
        test.view_mut((0, 0), (n, n)).copy_from(&shifted);
        test.view_mut((0, n), (n, n_mat.ncols()))
            .copy_from(&to_complex(n_mat));
        if rank_complex(&test, tol) < n {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Stabilizability of `(A, B)`.
pub fn check_stabilizable(p: &Plant) -> Result<bool> {
    pbh(&p.a, &p.b, p.time_model)
}

/// Detectability of `(Q^{1/2}, A)`, tested as stabilizability of the dual
/// pair `(Aᵀ, Q^{1/2})`.
pub fn check_detectable(p: &Plant) -> Result<bool> {
    let q_half = sqrt_psd(&p.q)?;
    pbh(&p.a.transpose(), &q_half, p.time_model)
}

/// Krylov matrix `[B, AB, …, A^{n−1}B]`.
pub fn controllability_matrix(a: &Mat, b: &Mat) -> Mat {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = Mat::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        out.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = a * &block;
    }
    out
}

/// Controllability of `(A, B)` via the rank of the Krylov matrix.
pub fn check_controllable(a: &Mat, b: &Mat) -> Result<bool> {
    if a.nrows() != a.ncols() || b.nrows() != a.nrows() {
        return Err(LqrError::Dimension("controllability pair shapes".into()));
    }
    let c = controllability_matrix(a, b);
    let scale = spectral_norm(&c);
    if scale == 0.0 {
        return Ok(false);
    }
    Ok(rank(&c, RANK_RTOL * scale) == a.nrows())
}

/// `Im(B) ⊆ Im(W)`: each column of `B` projected on the span of the
/// non-negligible eigenvectors of `W` leaves a residual `≤ 1e-8·‖B‖`.
pub fn range_included(b: &Mat, w: &Mat) -> Result<bool> {
    let e = sym_eig(w)?;
    let cutoff = RANK_RTOL * e.max().abs().max(f64::MIN_POSITIVE);
    let cols: Vec<usize> = (0..e.values.len())
        .filter(|&i| e.values[i] > cutoff)
        .collect();
    let basis = Mat::from_fn(w.nrows(), cols.len(), |r, c| e.vectors[(r, cols[c])]);
    let residual = b - &basis * (basis.transpose() * b);
    Ok(residual.norm() <= RANK_RTOL * b.norm().max(f64::MIN_POSITIVE))
}

/// Standing-assumption predicates plus both sufficient conditions for
/// positive definiteness of every stabilizing Lyapunov variable.
pub fn check_assumption22_sufficient(p: &Plant) -> Result<StructureReport> {
    Ok(StructureReport {
        stabilizable: check_stabilizable(p)?,
        detectable: check_detectable(p)?,
        controllable: check_controllable(&p.a, &p.b)?,
        assumption22_w_pd: is_pd(&p.w, default_tol(&p.w)),
        assumption22_imb_in_imw: range_included(&p.b, &p.w)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin::{self, ExampleId};

    fn scalar(a: f64, b: f64, tm: TimeModel) -> Plant {
        let s = |v: f64| Mat::from_element(1, 1, v);
        Plant::new(s(a), s(b), s(1.0), s(1.0), s(1.0), tm).unwrap()
    }

    #[test]
    fn psi_examples() {
        let n = 2;
        let mut blk = Mat::zeros(4, 4);
        blk.view_mut((0, n), (n, n)).fill_with_identity();
        blk.view_mut((n, 0), (n, n)).fill_with_identity();
        assert_eq!(psi(&blk, TimeModel::Ct).unwrap(), Mat::identity(2, 2) * 2.0);

        let mut blk = Mat::zeros(4, 4);
        blk.view_mut((0, 0), (n, n)).copy_from(&(Mat::identity(2, 2) * 2.0));
        blk.view_mut((n, n), (n, n)).fill_with_identity();
        assert_eq!(psi(&blk, TimeModel::Dt).unwrap(), Mat::identity(2, 2));

        let blk = lifted_block(&Mat::zeros(2, 2), &Mat::identity(2, 2));
        assert_eq!(psi(&blk, TimeModel::Dt).unwrap(), -Mat::identity(2, 2));
    }

    #[test]
    fn psi_contract_errors() {
        assert!(matches!(psi(&Mat::zeros(3, 3), TimeModel::Ct), Err(LqrError::Contract(_))));
        let mut blk = Mat::zeros(2, 2);
        blk[(0, 1)] = 1.0;
        assert!(matches!(psi(&blk, TimeModel::Dt), Err(LqrError::Contract(_))));
    }

    #[test]
    fn closed_loop_examples() {
        let ct = scalar(0.0, 1.0, TimeModel::Ct);
        assert_eq!(closed_loop(&ct, &ct.zero_gain()).unwrap(), ct.a);
        assert_eq!(closed_loop(&ct, &Mat::from_element(1, 1, -1.0)).unwrap()[(0, 0)], -1.0);
        let dt = scalar(1.0, 1.0, TimeModel::Dt);
        assert_eq!(closed_loop(&dt, &Mat::from_element(1, 1, -1.0)).unwrap()[(0, 0)], 0.0);
        assert!(matches!(closed_loop(&dt, &Mat::zeros(2, 1)), Err(LqrError::Dimension(_))));
    }

    #[test]
    fn stabilizing_set_membership() {
        let ct = scalar(0.0, 1.0, TimeModel::Ct);
        assert!(is_in_k(&ct, &Mat::from_element(1, 1, -0.5)).unwrap());
        assert!(!is_in_k(&ct, &Mat::from_element(1, 1, 0.0)).unwrap());
        let dt = scalar(1.0, 1.0, TimeModel::Dt);
        assert!(!is_in_k(&dt, &Mat::from_element(1, 1, -2.5)).unwrap());
        assert!(is_in_k(&dt, &Mat::from_element(1, 1, -1.9)).unwrap());
        // boundary gain k = -2 gives closed loop -1
        assert!(!is_in_k(&dt, &Mat::from_element(1, 1, -2.0)).unwrap());
        let ex31 = builtin::plant(ExampleId::Ex31).unwrap();
        assert!(is_in_k(&ex31, &ex31.zero_gain()).unwrap());
    }

    #[test]
    fn stabilizability() {
        assert!(check_stabilizable(&builtin::plant(ExampleId::Ex31).unwrap()).unwrap());
        let i2 = Mat::identity(2, 2);
        let p = Plant::new(i2.clone(), Mat::zeros(2, 1), i2.clone(), Mat::identity(1, 1), i2.clone(), TimeModel::Dt).unwrap();
        assert!(!check_stabilizable(&p).unwrap());
        let p = Plant::new(i2.clone() * 0.5, Mat::zeros(2, 1), i2.clone(), Mat::identity(1, 1), i2, TimeModel::Dt).unwrap();
        assert!(check_stabilizable(&p).unwrap());
    }

    #[test]
    fn detectability() {
        assert!(check_detectable(&builtin::plant(ExampleId::Ex32).unwrap()).unwrap());
        let i2 = Mat::identity(2, 2);
        let a = Mat::from_row_slice(2, 2, &[3.0, 1.0, 0.0, 2.0]);
        let p = Plant::new(a, Mat::zeros(2, 1), i2.clone(), Mat::identity(1, 1), i2, TimeModel::Ct).unwrap();
        assert!(check_detectable(&p).unwrap());
    }

    #[test]
    fn controllability() {
        let e33 = builtin::plant(ExampleId::Ex33).unwrap();
        assert!(!check_controllable(&e33.a, &e33.b).unwrap());
        let e32 = builtin::plant(ExampleId::Ex32).unwrap();
        assert!(check_controllable(&e32.a, &e32.b).unwrap());
        assert!(check_controllable(&Mat::zeros(2, 2), &Mat::identity(2, 2)).unwrap());
    }

    #[test]
    fn sufficient_conditions_on_examples() {
        let r = check_assumption22_sufficient(&builtin::plant(ExampleId::Ex31).unwrap()).unwrap();
        assert!(r.assumption22_w_pd);
        assert!(r.standing_assumption());
        let r = check_assumption22_sufficient(&builtin::plant(ExampleId::Ex32).unwrap()).unwrap();
        assert!(!r.assumption22_w_pd);
        assert!(r.controllable && r.assumption22_imb_in_imw);
        let r = check_assumption22_sufficient(&builtin::plant(ExampleId::Ex33).unwrap()).unwrap();
        assert!(!r.assumption22_w_pd);
        assert!(!(r.controllable && r.assumption22_imb_in_imw));
        assert!(!r.pd_equivalence_sufficient());
        assert!(r.standing_assumption());
    }

    #[test]
    fn plant_rejects_bad_weights() {
        let s = |v: f64| Mat::from_element(1, 1, v);
        assert!(Plant::new(s(0.0), s(1.0), s(0.0), s(1.0), s(1.0), TimeModel::Ct).is_err());
        assert!(Plant::new(s(0.0), s(1.0), s(1.0), s(0.0), s(1.0), TimeModel::Ct).is_err());
        assert!(Plant::new(s(0.0), s(1.0), s(1.0), s(1.0), s(-1.0), TimeModel::Ct).is_err());
        assert!(matches!(
            Plant::new(s(0.0), Mat::zeros(2, 1), s(1.0), s(1.0), s(1.0), TimeModel::Ct),
            Err(LqrError::Dimension(_))
        ));
    }

    #[test]
    fn plant_json_round_trip() {
        let p = builtin::plant(ExampleId::Ex32).unwrap();
        let s = serde_json::to_string(&p.to_json()).unwrap();
        assert!(s.contains("\"time_model\":\"dt\""));
        assert_eq!(Plant::from_json_str(&s).unwrap(), p);
    }
}
