//! `lqrdom`: solve, certify, descend and map LQR policy landscapes.
//!
//! Exit codes: 0 success, 2 assumption-check failure, 3 numerical
//! failure, 4 usage error. Failures print one JSON object to stderr.

mod landscape;
mod output;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lqrdom_core::dominance::{certify_samples, summarize, DominanceReport};
use lqrdom_core::matrixkit::from_rows;
use lqrdom_core::optimize::{gradient_descent, DescentConfig};
use lqrdom_core::sampling::{stabilizing_gains, SamplerConfig};
use lqrdom_core::{riccati, ExampleId, LqrError, Mat, Plant};
use serde_json::json;

use landscape::{default_axis, evaluate_grid, Axis};
use output::{sink, to_json};

#[derive(Parser)]
#[command(name = "lqrdom", version, about = "LQR policy optimization and gradient-dominance certification")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print a built-in plant as JSON.
    Example {
        /// ex31, ex32, ex33, ex34, ex41ct or ex41dt
        id: String,
        /// Euler step of ex34
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the Riccati equation and print the optimum as JSON.
    Solve {
        #[command(flatten)]
        plant: PlantSource,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify the optimality-gap inequalities; one JSON report per line,
    /// then a summary line.
    Certify {
        #[command(flatten)]
        plant: PlantSource,
        /// Single gain as row-major JSON, e.g. '[[0.1,0.2]]'
        #[arg(long, conflicts_with_all = ["samples", "near_boundary"])]
        k: Option<String>,
        /// Number of seeded stabilizing gains around K*
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fraction of samples placed near the stability boundary
        #[arg(long, default_value_t = 0.0)]
        near_boundary: f64,
        /// Also write margin arrays and summary as one JSON document
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run gradient descent and print the trace as CSV.
    Descend {
        #[command(flatten)]
        plant: PlantSource,
        /// Initial gain as row-major JSON; zero by default
        #[arg(long)]
        k0: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long, default_value_t = 0.5)]
        backtrack: f64,
        #[arg(long, default_value_t = 1e-4)]
        armijo: f64,
        /// Absolute gradient tolerance; 1e-10·(1 + ‖∇J(K0)‖) by default
        #[arg(long)]
        tol_grad: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate J over a grid of two entries of K as CSV (k1,k2,J).
    Landscape {
        #[command(flatten)]
        plant: PlantSource,
        /// kmin,kmax,res; give once for both axes or twice, one per axis
        #[arg(long, allow_hyphen_values = true)]
        grid: Vec<String>,
        /// Row-major indices of the two entries of K to vary, e.g. 0,1;
        /// the others stay at K*
        #[arg(long)]
        axes: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PlantSource {
    /// Plant JSON file, or - for stdin
    #[arg(long, conflicts_with = "example")]
    plant: Option<PathBuf>,
    /// Built-in example id
    #[arg(long)]
    example: Option<String>,
    /// Euler step of ex34
    #[arg(long)]
    dt: Option<f64>,
}

enum Failure {
    Core(LqrError),
    Usage(String),
    Io(String),
}

impl From<LqrError> for Failure {
    fn from(e: LqrError) -> Self {
        Failure::Core(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl Failure {
    fn kind(&self) -> &'static str {
        match self {
            Failure::Core(e) => e.kind(),
            Failure::Usage(_) => "usage",
            Failure::Io(_) => "io",
        }
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Core(e) => match e {
                LqrError::Assumption(_)
                | LqrError::Stability(_)
                | LqrError::Inapplicable(_)
                | LqrError::Domain(_) => 2,
                LqrError::Input(_)
                | LqrError::Dimension(_)
                | LqrError::UnsupportedDimension(_)
                | LqrError::Contract(_) => 4,
                _ => 3,
            },
            Failure::Usage(_) | Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Usage(m) | Failure::Io(m) => m.clone(),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

impl PlantSource {
    fn load(&self) -> std::result::Result<Plant, Failure> {
        match (&self.plant, &self.example) {
            (Some(path), None) => {
                let text = if path == Path::new("-") {
                    let mut s = String::new();
                    io::stdin().read_to_string(&mut s)?;
                    s
                } else {
                    fs::read_to_string(path)
                        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?
                };
                Ok(Plant::from_json_str(&text)?)
            }
            (None, Some(id)) => Ok(lqrdom_core::builtin::plant(ExampleId::parse(id, self.dt)?)?),
            _ => Err(Failure::Usage("give exactly one of --plant or --example".into())),
        }
    }
}

fn parse_gain(p: &Plant, s: &str) -> std::result::Result<Mat, Failure> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(s)
        .map_err(|e| Failure::Usage(format!("gain must be a row-major JSON array: {e}")))?;
    let k = from_rows(&rows)?;
    p.check_gain(&k)?;
    Ok(k)
}

fn margin_arrays(reports: &[DominanceReport]) -> serde_json::Value {
    json!({
        "gap": reports.iter().map(|r| r.gap).collect::<Vec<_>>(),
        "lower_bound": reports.iter().map(|r| r.lower_bound_margin).collect::<Vec<_>>(),
        "upper_bound": reports.iter().map(|r| r.upper_bound_margin).collect::<Vec<_>>(),
        "error_bound": reports.iter().map(|r| r.error_bound_margin).collect::<Vec<_>>(),
        "pl": reports.iter().map(|r| r.pl_margin).collect::<Vec<_>>(),
        "mu_k": reports.iter().map(|r| r.mu_k).collect::<Vec<_>>(),
    })
}

fn run(cmd: Cmd) -> Outcome {
    match cmd {
        Cmd::Example { id, dt, out } => {
            let p = lqrdom_core::builtin::plant(ExampleId::parse(&id, dt)?)?;
            let mut w = sink(out.as_deref())?;
            writeln!(w, "{}", to_json(&p.to_json()))?;
            w.flush()?;
        }
        Cmd::Solve { plant, out } => {
            let p = plant.load()?;
            let ric = riccati::solve(&p)?;
            let mut w = sink(out.as_deref())?;
            writeln!(w, "{}", to_json(&ric))?;
            w.flush()?;
        }
        Cmd::Certify { plant, k, samples, seed, near_boundary, report, out } => {
            let p = plant.load()?;
            let ric = riccati::solve(&p)?;
            let gains = match k {
                Some(s) => vec![parse_gain(&p, &s)?],
                None => {
                    if !(0.0..=1.0).contains(&near_boundary) {
                        return Err(Failure::Usage("--near-boundary must lie in [0, 1]".into()));
                    }
                    let cfg = SamplerConfig::default()
                        .with_seed(seed)
                        .with_count(samples)
                        .with_near_boundary(near_boundary);
                    stabilizing_gains(&p, &ric.k_star, &cfg)?
                }
            };
            let reports = certify_samples(&p, &ric, &gains)?;
            let summary = summarize(&reports);
            let mut w = sink(out.as_deref())?;
            for r in &reports {
                writeln!(w, "{}", to_json(r))?;
            }
            writeln!(w, "{}", to_json(&json!({ "summary": summary })))?;
            w.flush()?;
            if let Some(path) = report {
                let doc = json!({
                    "j_star": ric.j_star,
                    "samples": reports.len(),
                    "margins": margin_arrays(&reports),
                    "summary": summary,
                });
                fs::write(&path, to_json(&doc) + "\n")
                    .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            }
        }
        Cmd::Descend { plant, k0, step, backtrack, armijo, tol_grad, max_iter, out } => {
            let p = plant.load()?;
            let k0 = match k0 {
                Some(s) => parse_gain(&p, &s)?,
                None => p.zero_gain(),
            };
            let cfg = DescentConfig {
                step,
                backtrack_factor: backtrack,
                armijo_c: armijo,
                tol_grad,
                max_iter,
            };
            let trace = gradient_descent(&p, &k0, &cfg)?;
            let mut w = sink(out.as_deref())?;
            w.write_all(trace.to_csv().as_bytes())?;
            w.flush()?;
            if !trace.converged {
                eprintln!("warning: stopped after {max_iter} iterations without reaching the gradient tolerance");
            }
        }
        Cmd::Landscape { plant, grid, axes, out } => {
            let p = plant.load()?;
            let size = p.m() * p.n();
            let axes = match axes {
                Some(s) => {
                    let v: Vec<usize> = s
                        .split(',')
                        .map(|t| t.trim().parse())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Failure::Usage(format!("--axes expects i,j, got '{s}'")))?;
                    match v[..] {
                        [a, b] => (a, b),
                        _ => return Err(Failure::Usage(format!("--axes expects i,j, got '{s}'"))),
                    }
                }
                None if size == 2 => (0, 1),
                None => {
                    return Err(LqrError::UnsupportedDimension(format!(
                        "K has {size} entries; landscapes need exactly 2, or pick two with --axes i,j"
                    ))
                    .into())
                }
            };
            if axes.0 >= size || axes.1 >= size || axes.0 == axes.1 {
                return Err(Failure::Usage(format!(
                    "--axes must name two distinct entries of K in 0..{size}"
                )));
            }
            let ric = riccati::solve(&p)?;
            let flat = |i: usize| ric.k_star[(i / p.n(), i % p.n())];
            let (a1, a2) = match grid.len() {
                0 => (
                    default_axis(flat(axes.0), &ric.k_star),
                    default_axis(flat(axes.1), &ric.k_star),
                ),
                1 => {
                    let a = Axis::parse(&grid[0])?;
                    (a, a)
                }
                2 => (Axis::parse(&grid[0])?, Axis::parse(&grid[1])?),
                _ => return Err(Failure::Usage("--grid is given at most twice".into())),
            };
            let cells = evaluate_grid(&p, &ric.k_star, axes, a1, a2)?;
            let failed = cells.iter().filter(|c| c.j.is_some_and(f64::is_nan)).count();
            if failed > 0 {
                eprintln!("warning: {failed} stabilizing cells could not be evaluated (written as NaN)");
            }
            let mut w = sink(out.as_deref())?;
            w.write_all(landscape::to_csv(&cells).as_bytes())?;
            w.flush()?;
        }
    }
    Ok(())
}

fn fail(f: Failure) -> ExitCode {
    let code = f.code();
    let err = json!({
        "error": { "kind": f.kind(), "message": f.message(), "exit_code": code }
    });
    eprintln!("{}", to_json(&err));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(Failure::Usage(e.render().to_string())),
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f),
    }
}
