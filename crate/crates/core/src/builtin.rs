//! Built-in benchmark plants.

use std::fmt;
use std::str::FromStr;

use crate::error::{LqrError, Result};
use crate::matrixkit::Mat;
use crate::systems::{Plant, TimeModel};

/// Discretization step used for the discrete-time flat-landscape example
/// unless one is given explicitly.
pub const EX34_DEFAULT_DT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExampleId {
    /// DT, `W ≻ 0`, `Q` only PSD, `(A, B)` stabilizable but not controllable.
    Ex31,
    /// DT, `(A, B)` controllable, `Q` and `W` only PSD.
    Ex32,
    /// CT, `W` singular and `(A, B)` uncontrollable: a flat optimal locus.
    Ex33,
    /// Euler discretization of [`ExampleId::Ex33`] with step `dt ∈ (0, 1]`.
    Ex34 { dt: f64 },
    /// CT scalar integrator `ẋ = u`.
    Ex41Ct,
    /// DT scalar integrator `x⁺ = x + u`.
    Ex41Dt,
}

impl ExampleId {
    pub const ALL_NAMES: [&'static str; 6] = ["ex31", "ex32", "ex33", "ex34", "ex41ct", "ex41dt"];

    pub fn parse(name: &str, dt: Option<f64>) -> Result<Self> {
        let id = match name {
            "ex31" => ExampleId::Ex31,
            "ex32" => ExampleId::Ex32,
            "ex33" => ExampleId::Ex33,
            "ex34" => ExampleId::Ex34 {
                dt: dt.unwrap_or(EX34_DEFAULT_DT),
            },
            "ex41ct" => ExampleId::Ex41Ct,
            "ex41dt" => ExampleId::Ex41Dt,
            other => {
                return Err(LqrError::Input(format!(
                    "unknown example '{other}' (expected one of {})",
                    Self::ALL_NAMES.join(", ")
                )))
            }
        };
        if let ExampleId::Ex34 { dt } = id {
            if !(dt > 0.0 && dt <= 1.0) {
                return Err(LqrError::Input(format!("ex34 requires dt in (0, 1], got {dt}")));
            }
        }
        Ok(id)
    }
}

impl FromStr for ExampleId {
    type Err = LqrError;

    fn from_str(s: &str) -> Result<Self> {
        ExampleId::parse(s, None)
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExampleId::Ex31 => f.write_str("ex31"),
            ExampleId::Ex32 => f.write_str("ex32"),
            ExampleId::Ex33 => f.write_str("ex33"),
            ExampleId::Ex34 { dt } => write!(f, "ex34(dt={dt})"),
            ExampleId::Ex41Ct => f.write_str("ex41ct"),
            ExampleId::Ex41Dt => f.write_str("ex41dt"),
        }
    }
}

fn m2(a: f64, b: f64, c: f64, d: f64) -> Mat {
    Mat::from_row_slice(2, 2, &[a, b, c, d])
}

fn s(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

/// Problem data of a built-in example.
pub fn plant(id: ExampleId) -> Result<Plant> {
    let col = |a: f64, b: f64| Mat::from_column_slice(2, 1, &[a, b]);
    let coupled = m2(2.0, 0.5, 0.5, 2.0);
    let w_diff = m2(1.0, -1.0, -1.0, 1.0) * 25.0;
    match id {
        ExampleId::Ex31 => Plant::new(
            m2(0.9, 0.01, 0.01, 0.9),
            col(0.1, 0.1),
            m2(1.0, -1.0, -1.0, 1.0),
            s(0.1),
            Mat::identity(2, 2) * 25.0,
            TimeModel::Dt,
        ),
        ExampleId::Ex32 => Plant::new(
            m2(0.9, 0.01, 0.01, -0.9),
            col(0.1, 0.1),
            m2(0.0, 0.0, 0.0, 1.0),
            s(1.0),
            m2(1.0, 1.0, 1.0, 1.0) * 25.0,
            TimeModel::Dt,
        ),
        ExampleId::Ex33 => Plant::new(
            -coupled,
            col(1.0, 1.0),
            Mat::identity(2, 2),
            s(1.0),
            w_diff,
            TimeModel::Ct,
        ),
        ExampleId::Ex34 { dt } => {
            if !(dt > 0.0 && dt <= 1.0) {
                return Err(LqrError::Input(format!("ex34 requires dt in (0, 1], got {dt}")));
            }
            Plant::new(
                Mat::identity(2, 2) - coupled * dt,
                col(dt, dt),
                Mat::identity(2, 2),
                s(1.0),
                w_diff,
                TimeModel::Dt,
            )
        }
        ExampleId::Ex41Ct => Plant::new(s(0.0), s(1.0), s(1.0), s(1.0), s(1.0), TimeModel::Ct),
        ExampleId::Ex41Dt => Plant::new(s(1.0), s(1.0), s(1.0), s(1.0), s(1.0), TimeModel::Dt),
    }
}

/// The four matrix examples with the default discretization step.
pub fn matrix_examples() -> Vec<ExampleId> {
    vec![
        ExampleId::Ex31,
        ExampleId::Ex32,
        ExampleId::Ex33,
        ExampleId::Ex34 {
            dt: EX34_DEFAULT_DT,
        },
    ]
}
