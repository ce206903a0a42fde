//! Seeded samplers for gains and random test plants.
//!
//! Stabilizing gains are drawn by rejection: Gaussian directions around a
//! center gain, scaled to geometrically spaced radii, kept only when the
//! closed loop is stable. Near-boundary gains come from bisection along
//! random rays until the closed loop reaches a target stability degree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LqrError, Result};
use crate::matrixkit::{eigvals, Mat};
use crate::systems::{is_in_k, stability_degree, Plant, TimeModel};

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Geometric radius schedule and rejection budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub count: usize,
    /// Smallest perturbation radius (Frobenius), relative to `1 + ‖K_c‖`.
    pub radius_min: f64,
    /// Largest perturbation radius, same units.
    pub radius_max: f64,
    pub radius_levels: usize,
    /// Fraction of samples placed near the boundary of the stabilizing set.
    pub near_boundary_fraction: f64,
    /// Rejection budget, in attempts per requested sample.
    pub max_attempts_per_sample: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 0,
            count: 100,
            radius_min: 1e-3,
            radius_max: 3.0,
            radius_levels: 12,
            near_boundary_fraction: 0.0,
            max_attempts_per_sample: 200,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn with_near_boundary(mut self, fraction: f64) -> Self {
        self.near_boundary_fraction = fraction;
        self
    }

    pub fn with_radii(mut self, min: f64, max: f64) -> Self {
        self.radius_min = min;
        self.radius_max = max;
        self
    }

    fn radius(&self, level: usize, scale: f64) -> f64 {
        let levels = self.radius_levels.max(1);
        let t = if levels == 1 {
            0.0
        } else {
            (level % levels) as f64 / (levels - 1) as f64
        };
        scale * self.radius_min * (self.radius_max / self.radius_min).powf(t)
    }
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Gaussian direction normalized to unit Frobenius norm.
pub fn unit_direction(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    loop {
        let d = gaussian_matrix(rng, rows, cols);
        let nrm = d.norm();
        if nrm > 1e-12 {
            return d / nrm;
        }
    }
}

/// Stabilizing gains around `center`, with the configured fraction near
/// the boundary. The center itself is never returned.
pub fn stabilizing_gains(p: &Plant, center: &Mat, cfg: &SamplerConfig) -> Result<Vec<Mat>> {
    p.check_gain(center)?;
    if !is_in_k(p, center)? {
        return Err(LqrError::Sampling("sampling center is not stabilizing".into()));
    }
    let mut rng = rng(cfg.seed);
    let n_boundary = ((cfg.count as f64) * cfg.near_boundary_fraction).round() as usize;
    let n_boundary = n_boundary.min(cfg.count);
    let mut out = Vec::with_capacity(cfg.count);
    let scale = 1.0 + center.norm();
    let budget = cfg.max_attempts_per_sample.max(1) * cfg.count.max(1);
    let mut attempts = 0;
    let mut level = 0;
    while out.len() < cfg.count - n_boundary {
        attempts += 1;
        if attempts > budget {
            return Err(LqrError::Sampling(format!(
                "accepted {} of {} stabilizing samples",
                out.len(),
                cfg.count - n_boundary
            )));
        }
        let d = unit_direction(&mut rng, center.nrows(), center.ncols());
        let k = center + d * cfg.radius(level, scale);
        level += 1;
        if is_in_k(p, &k)? {
            out.push(k);
        }
    }
    for _ in 0..n_boundary {
        let cap = 10.0 * cfg.radius_max * scale;
        out.push(near_boundary_gain(p, center, &mut rng, None, cap)?);
    }
    Ok(out)
}

/// Target stability degree close to the boundary: a spectral radius in
/// `[0.999, 0.9999]` (DT) or a spectral abscissa in `[−1e-3, −1e-4]`
/// relative to `1 + ‖A‖` (CT).
fn boundary_target(p: &Plant, rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random();
    let depth = 10f64.powf(-3.0 - u);
    match p.time_model {
        TimeModel::Dt => 1.0 - depth,
        TimeModel::Ct => -depth * (1.0 + p.a.norm()),
    }
}

/// Bisection along a random ray from `center` until the closed loop
/// reaches `target` stability degree (random near-boundary target if
/// `None`). Rays that stay stabilizing out to distance `max_radius` are
/// redrawn.
pub fn near_boundary_gain(
    p: &Plant,
    center: &Mat,
    rng: &mut impl Rng,
    target: Option<f64>,
    max_radius: f64,
) -> Result<Mat> {
    let cap = max_radius;
    for _ in 0..1000 {
        let target = target.unwrap_or_else(|| boundary_target(p, rng));
        let d = unit_direction(rng, center.nrows(), center.ncols());
        let mut hi = (1e-2 * (1.0 + center.norm())).min(cap);
        while is_in_k(p, &(center + &d * hi))? {
            if hi >= cap {
                break;
            }
            hi = (2.0 * hi).min(cap);
        }
        if is_in_k(p, &(center + &d * hi))? {
            continue;
        }
        let start = stability_degree(p, center)?;
        if start >= target {
            return Err(LqrError::Sampling(
                "center is already beyond the boundary target".into(),
            ));
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if stability_degree(p, &(center + &d * mid))? < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let k = center + &d * lo;
        if is_in_k(p, &k)? {
            return Ok(k);
        }
    }
    Err(LqrError::Sampling("no ray reached the stability boundary".into()))
}

/// Gains around `center` with no stability filter: radii span the
/// configured schedule, so both stable and unstable closed loops appear.
pub fn unrestricted_gains(center: &Mat, cfg: &SamplerConfig) -> Vec<Mat> {
    let mut rng = rng(cfg.seed);
    let scale = 1.0 + center.norm();
    (0..cfg.count)
        .map(|i| {
            let d = unit_direction(&mut rng, center.nrows(), center.ncols());
            center + d * cfg.radius(i, scale)
        })
        .collect()
}

/// Random matrix with a prescribed stability degree: spectral radius in
/// `[0.1, 0.95]` (DT) or spectral abscissa in `[−2, −0.1]` (CT).
pub fn random_stable(rng: &mut impl Rng, n: usize, tm: TimeModel) -> Result<Mat> {
    let g = gaussian_matrix(rng, n, n);
    let spec = eigvals(&g)?;
    let u: f64 = rng.random();
    Ok(match tm {
        TimeModel::Dt => {
            let rho = spec.spectral_radius().max(1e-12);
            g * ((0.1 + 0.85 * u) / rho)
        }
        TimeModel::Ct => {
            let shift = spec.abscissa() + 0.1 + 1.9 * u;
            g - Mat::identity(n, n) * shift
        }
    })
}

/// Random PSD matrix `LLᵀ` of the given rank, plus `ridge·I`.
pub fn random_psd(rng: &mut impl Rng, n: usize, rank: usize, ridge: f64) -> Mat {
    let l = gaussian_matrix(rng, n, rank);
    &l * l.transpose() + Mat::identity(n, n) * ridge
}

/// Random plant with generic (hence controllable) `B`, `Q ≻ 0`, `R ≻ 0`
/// and `W ≻ 0`; the open loop may be unstable.
pub fn random_plant(rng: &mut impl Rng, n: usize, m: usize, tm: TimeModel) -> Result<Plant> {
    let a = match tm {
        TimeModel::Ct => gaussian_matrix(rng, n, n) * 0.8,
        TimeModel::Dt => gaussian_matrix(rng, n, n) * (0.9 / (n as f64).sqrt()),
    };
    let b = gaussian_matrix(rng, n, m);
    let q = random_psd(rng, n, n, 0.1);
    let r = random_psd(rng, m, m, 0.5);
    let w = random_psd(rng, n, n, 0.1);
    Plant::new(a, b, q, r, w, tm)
}
