//! Cost landscape over two entries of `K`.

use std::fmt::Write;

use lqrdom_core::lqr::cost;
use lqrdom_core::systems::is_in_k;
use lqrdom_core::{LqrError, Mat, Plant, Result};
use rayon::prelude::*;

/// Written in place of `J` when the gain does not stabilize.
pub const SENTINEL: &str = "inf";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub res: usize,
}

impl Axis {
    /// Parses `kmin,kmax,res`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || LqrError::Input(format!("--grid expects kmin,kmax,res, got '{s}'"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let min: f64 = parts[0].parse().map_err(|_| bad())?;
        let max: f64 = parts[1].parse().map_err(|_| bad())?;
        let res: usize = parts[2].parse().map_err(|_| bad())?;
        Axis::new(min, max, res)
    }

    /// A degenerate axis (`min == max`) has resolution 1; any other needs
    /// at least 2 points.
    pub fn new(min: f64, max: f64, res: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(LqrError::Input(format!("axis range [{min}, {max}] is invalid")));
        }
        if min == max && res != 1 {
            return Err(LqrError::Input("a degenerate axis takes resolution 1".into()));
        }
        if min < max && res < 2 {
            return Err(LqrError::Input("axis resolution must be at least 2".into()));
        }
        Ok(Axis { min, max, res })
    }

    pub fn point(&self, i: usize) -> f64 {
        if self.res == 1 {
            self.min
        } else if i + 1 == self.res {
            self.max
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.res - 1) as f64
        }
    }
}

/// Default box: `K*_e ± 3·max(1, ‖K*‖_∞)` at 201 points.
pub fn default_axis(center: f64, k_star: &Mat) -> Axis {
    let inf_norm = k_star
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let h = 3.0 * inf_norm.max(1.0);
    Axis { min: center - h, max: center + h, res: 201 }
}

/// One grid cell. `j` is `None` outside the stabilizing set and
/// `Some(NaN)` when the cost could not be evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub k1: f64,
    pub k2: f64,
    pub j: Option<f64>,
}

/// `(row, col)` of a flat row-major index into `K`.
fn entry(k: &Mat, flat: usize) -> (usize, usize) {
    (flat / k.ncols(), flat % k.ncols())
}

/// Evaluates the grid; `axes` are flat row-major indices of the entries
/// of `K` that vary, all other entries are taken from `base`.
pub fn evaluate_grid(p: &Plant, base: &Mat, axes: (usize, usize), a1: Axis, a2: Axis) -> Result<Vec<Cell>> {
    p.check_gain(base)?;
    let size = base.len();
    if axes.0 >= size || axes.1 >= size || axes.0 == axes.1 {
        return Err(LqrError::Input(format!(
            "--axes must name two distinct entries of K in 0..{size}"
        )));
    }
    let (e1, e2) = (entry(base, axes.0), entry(base, axes.1));
    let idx: Vec<(usize, usize)> = (0..a1.res)
        .flat_map(|i| (0..a2.res).map(move |j| (i, j)))
        .collect();
    idx.par_iter()
        .map(|&(i, j)| {
            let mut k = base.clone();
            k[e1] = a1.point(i);
            k[e2] = a2.point(j);
            let j_val = if is_in_k(p, &k)? {
                Some(cost(p, &k).unwrap_or(f64::NAN))
            } else {
                None
            };
            Ok(Cell { k1: k[e1], k2: k[e2], j: j_val })
        })
        .collect()
}

/// CSV with header `k1,k2,J`, 17 significant digits.
pub fn to_csv(cells: &[Cell]) -> String {
    let mut s = String::from("k1,k2,J\n");
    for c in cells {
        let _ = match c.j {
            Some(j) => writeln!(s, "{:.16e},{:.16e},{j:.16e}", c.k1, c.k2),
            None => writeln!(s, "{:.16e},{:.16e},{SENTINEL}", c.k1, c.k2),
        };
    }
    s
}
