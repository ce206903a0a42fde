//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use lqrdom_core::builtin::{self, ExampleId};
use lqrdom_core::convexreform::{
    self, check_equivalence_eq_vs_ineq, check_partial_qg, check_segment_convexity,
    check_subgradient_ineq, f_cvx, feasible, jacobian_gamma, upsilon, InflatedSample,
    LiftedPoint,
};
use lqrdom_core::dominance::{self, certify_samples, global_mu_dt, DominanceReport};
use lqrdom_core::lqr::{evaluate, gradient_fd, lyapunov_variable};
use lqrdom_core::lyapunov::solve_lyapunov;
use lqrdom_core::matrixkit::{lambda_min, sqrt_psd, vec};
use lqrdom_core::optimize::{fit_log_linear, gradient_descent, DescentConfig};
use lqrdom_core::riccati::{self, RiccatiSolution};
use lqrdom_core::sampling::{self, SamplerConfig};
use lqrdom_core::systems::{check_controllable, is_in_k, stability_degree};
use lqrdom_core::{Mat, Plant, TimeModel};
use rand::Rng;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn s(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if b == 0.0 {
        a.abs() <= tol
    } else {
        (a - b).abs() <= tol * b.abs()
    }
}

fn setup(id: ExampleId) -> (Plant, RiccatiSolution) {
    let p = builtin::plant(id).unwrap();
    let ric = riccati::solve(&p).unwrap();
    (p, ric)
}

fn a1() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    let ct = builtin::plant(ExampleId::Ex41Ct).unwrap();
    for k in [-0.25, -0.5, -1.0, -2.0, -4.0] {
        let ev = evaluate(&ct, &s(k)).unwrap();
        let checks = [
            ("X", ev.x_k.x[(0, 0)], -1.0 / (2.0 * k)),
            ("J", ev.j, -(1.0 + k * k) / (2.0 * k)),
            ("grad", ev.grad[(0, 0)], (1.0 - k * k) / (2.0 * k * k)),
        ];
        for (name, got, want) in checks {
            if !rel_close(got, want, 1e-12) {
                bad.push(format!("CT {name}({k}) = {got}, want {want}"));
            }
        }
    }
    let ric = riccati::solve(&ct).unwrap();
    if !rel_close(ric.k_star[(0, 0)], -1.0, 1e-12) || !rel_close(ric.j_star, 1.0, 1e-12) {
        bad.push(format!("CT K* = {}, J* = {}", ric.k_star[(0, 0)], ric.j_star));
    }

    let dt = builtin::plant(ExampleId::Ex41Dt).unwrap();
    let ric = riccati::solve(&dt).unwrap();
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    if (ric.p_star[(0, 0)] - golden).abs() > 1e-10 {
        bad.push(format!("DT P* = {}", ric.p_star[(0, 0)]));
    }
    let k_star = -golden / (1.0 + golden);
    if !rel_close(ric.k_star[(0, 0)], k_star, 1e-10) {
        bad.push(format!("DT K* = {}", ric.k_star[(0, 0)]));
    }
    for k in [-0.5, -1.0, -1.5] {
        let x = lyapunov_variable(&dt, &s(k)).unwrap().x[(0, 0)];
        let want = 1.0 / (1.0 - (1.0 + k) * (1.0 + k));
        if !rel_close(x, want, 1e-12) {
            bad.push(format!("DT X({k}) = {x}, want {want}"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(1) {
        bad.push(format!("took {elapsed:?}"));
    }
    outcome(bad.is_empty(), if bad.is_empty() { "all closed forms matched".into() } else { bad.join("; ") })
}

fn a2() -> Outcome {
    let start = Instant::now();
    let mut plants: Vec<(String, Plant)> = builtin::matrix_examples()
        .into_iter()
        .map(|id| (id.to_string(), builtin::plant(id).unwrap()))
        .collect();
    let mut rng = sampling::rng(2024);
    for i in 0..20 {
        let n = 1 + i % 4;
        let m = 1 + (i / 4) % 2;
        let tm = if i % 2 == 0 { TimeModel::Ct } else { TimeModel::Dt };
        plants.push((format!("random#{i}({tm},n={n},m={m})"), sampling::random_plant(&mut rng, n, m, tm).unwrap()));
    }
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut checked = 0;
    for (idx, (name, p)) in plants.iter().enumerate() {
        let ric = riccati::solve(p).unwrap();
        let cfg = SamplerConfig::default().with_seed(100 + idx as u64).with_count(100);
        for k in sampling::stabilizing_gains(p, &ric.k_star, &cfg).unwrap() {
            let g = evaluate(p, &k).unwrap().grad;
            let fd = gradient_fd(p, &k, None).unwrap();
            let err = (&g - &fd).norm() / g.norm();
            checked += 1;
            worst = worst.max(err);
            if !(err <= 1e-5) {
                failures += 1;
                if failures <= 3 {
                    eprintln!("A2: {name} K={k:?} rel err {err:.3e}");
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let ok = failures == 0 && elapsed < Duration::from_secs(30);
    outcome(
        ok,
        format!("{checked} gains on {} plants, worst rel err {worst:.2e}, {failures} failures, {elapsed:.1?}", plants.len()),
    )
}

fn dominance_samples(id: ExampleId, seed: u64) -> (Plant, RiccatiSolution, Vec<DominanceReport>) {
    let (p, ric) = setup(id);
    let cfg = SamplerConfig::default()
        .with_seed(seed)
        .with_count(1000)
        .with_near_boundary(0.1);
    let gains = sampling::stabilizing_gains(&p, &ric.k_star, &cfg).unwrap();
    let reports = certify_samples(&p, &ric, &gains).unwrap();
    (p, ric, reports)
}

fn a3() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (id, seed) in [(ExampleId::Ex31, 31), (ExampleId::Ex32, 32)] {
        let (_, _, reps) = dominance_samples(id, seed);
        let pd: Vec<_> = reps.iter().filter(|r| r.mu_k.is_some()).collect();
        let violations = pd.iter().filter(|r| !r.pl_ok()).count();
        let worst = pd
            .iter()
            .map(|r| r.pl_margin.unwrap() / r.pl_tol())
            .fold(f64::INFINITY, f64::min);
        ok &= pd.len() == 1000 && violations == 0;
        lines.push(format!("{id}: {} PD samples, {violations} violations, min margin/tol {worst:.3e}", pd.len()));
    }
    outcome(ok, lines.join("; "))
}

fn a4() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (id, seed) in [(ExampleId::Ex31, 31), (ExampleId::Ex32, 32)] {
        let (_, _, reps) = dominance_samples(id, seed);
        let lower = reps.iter().filter(|r| !r.lower_ok()).count();
        let upper_checked = reps.iter().filter(|r| r.upper_bound_margin.is_some()).count();
        let upper = reps.iter().filter(|r| !r.upper_ok()).count();
        ok &= lower == 0 && upper == 0 && upper_checked == reps.len();
        lines.push(format!("{id}: lower violations {lower}, upper violations {upper} of {upper_checked}"));
    }
    // continuous time: the lower bound is an identity
    for (id, seed) in [(ExampleId::Ex33, 33), (ExampleId::Ex41Ct, 41)] {
        let (_, _, reps) = dominance_samples(id, seed);
        let mut worst: f64 = 0.0;
        let mut bad = 0;
        for r in &reps {
            let lower = r.gap - r.lower_bound_margin;
            // J − J* is a difference of O(J) numbers, so it carries an
            // absolute roundoff of a few eps·J on top of the relative test
            let allowed = 1e-8 * r.gap.abs().max(lower.abs()) + 1e-14 * (1.0 + r.j.abs());
            let dev = r.lower_bound_margin.abs() / allowed;
            worst = worst.max(dev);
            if dev > 1.0 {
                bad += 1;
            }
        }
        ok &= bad == 0;
        lines.push(format!("{id}: CT tightness worst deviation/allowed {worst:.2e}, {bad} violations"));
    }
    outcome(ok, lines.join("; "))
}

fn a5() -> Outcome {
    let (p, ric) = setup(ExampleId::Ex31);
    let mu = global_mu_dt(&p, &ric).unwrap();
    let cfg = SamplerConfig::default()
        .with_seed(5)
        .with_count(1000)
        .with_near_boundary(0.2);
    let gains = sampling::stabilizing_gains(&p, &ric.k_star, &cfg).unwrap();
    let mut violations = 0;
    let mut near = 0;
    for k in &gains {
        let ev = evaluate(&p, k).unwrap();
        if stability_degree(&p, k).unwrap() >= 0.999 {
            near += 1;
        }
        let g2 = ev.grad.norm_squared();
        if mu * (ev.j - ric.j_star) > g2 + 1e-9 * (1.0 + g2) {
            violations += 1;
        }
    }
    outcome(
        violations == 0 && near > 0,
        format!("mu = {mu:.6e}, {} samples ({near} with rho >= 0.999), {violations} violations", gains.len()),
    )
}

fn a6() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for (id, seed) in [(ExampleId::Ex31, 61), (ExampleId::Ex32, 62)] {
        let (p, ric) = setup(id);
        let cfg = SamplerConfig::default()
            .with_seed(seed)
            .with_count(500)
            .with_radii(1e-2, 30.0);
        let rep = dominance::verify_assumption22_sampled(&p, &ric.k_star, &cfg).unwrap();
        ok &= rep.precondition_holds
            && rep.mismatches == 0
            && rep.stabilizing > 0
            && rep.non_stabilizing > 0
            && rep.skipped_singular == 0;
        lines.push(format!(
            "{id}: {} stable / {} unstable, {} skipped, {} mismatches",
            rep.stabilizing, rep.non_stabilizing, rep.skipped_singular, rep.mismatches
        ));
    }
    outcome(ok, lines.join("; "))
}

fn flat_starts(p: &Plant, ric: &RiccatiSolution, seed: u64) -> Vec<Mat> {
    let mut rng = sampling::rng(seed);
    let along = Mat::from_row_slice(1, 2, &[1.0, 1.0]);
    let mut starts = Vec::new();
    while starts.len() < 8 {
        let c: f64 = rng.random_range(-1.0..0.5);
        let noise = sampling::gaussian_matrix(&mut rng, 1, 2) * 0.1;
        let k = &ric.k_star + &along * c + noise;
        if is_in_k(p, &k).unwrap() {
            starts.push(k);
        }
    }
    starts
}

fn a7() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let cfg = DescentConfig {
        tol_grad: Some(1e-8),
        max_iter: 100_000,
        ..DescentConfig::default()
    };
    for (id, seed) in [(ExampleId::Ex33, 73), (ExampleId::Ex34 { dt: 0.3 }, 74)] {
        let (p, ric) = setup(id);
        let starts = flat_starts(&p, &ric, seed);
        let rep = dominance::flat_direction_probe(&p, &ric, &starts, &cfg).unwrap();
        ok &= rep.optimal_terminals.len() >= 2 && rep.max_pairwise_distance >= 0.1;
        lines.push(format!(
            "{id}: {} of {} terminals optimal, max pairwise distance {:.3}",
            rep.optimal_terminals.len(),
            rep.starts,
            rep.max_pairwise_distance
        ));
    }
    outcome(ok, lines.join("; "))
}

/// Feasible probes `Υ(K', X_{K'} + t·Z)` around the optimum.
fn probes(p: &Plant, ric: &RiccatiSolution, count: usize, seed: u64) -> Vec<LiftedPoint> {
    let mut rng = sampling::rng(seed);
    let cfg = SamplerConfig::default()
        .with_seed(seed)
        .with_count(count)
        .with_radii(1e-2, 1.0);
    let gains = sampling::stabilizing_gains(p, &ric.k_star, &cfg).unwrap();
    let mut out = Vec::new();
    for (i, k) in gains.iter().enumerate() {
        let dw = sampling::random_psd(&mut rng, p.n(), p.n(), 0.0);
        let t = [0.0, 1e-3, 1e-2, 1e-1][i % 4] * p.w.norm() / dw.norm();
        let x = convexreform::inflate(p, k, t, &dw).unwrap();
        if let Ok(lp) = upsilon(k, &x, &ric.k_star) {
            if feasible(p, &ric.k_star, &lp) {
                out.push(lp);
            }
        }
    }
    out
}

fn a8() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let ids = [ExampleId::Ex31, ExampleId::Ex32, ExampleId::Ex33, ExampleId::Ex41Ct, ExampleId::Ex41Dt];
    for (n, id) in ids.into_iter().enumerate() {
        let (p, ric) = setup(id);
        let seed = 800 + n as u64;
        // cost transport on stabilizing samples with X_K ≻ 0
        let cfg = SamplerConfig::default().with_seed(seed).with_count(1000).with_near_boundary(0.1);
        let mut transport_worst: f64 = 0.0;
        let mut transported = 0;
        for k in sampling::stabilizing_gains(&p, &ric.k_star, &cfg).unwrap() {
            let ev = evaluate(&p, &k).unwrap();
            if let Ok(lp) = upsilon(&k, &ev.x_k.x, &ric.k_star) {
                let f = f_cvx(&lp, &p, &ric.k_star).unwrap();
                transport_worst = transport_worst.max((f - ev.j).abs() / ev.j.abs());
                transported += 1;
            }
        }
        let transport_ok = transport_worst <= 1e-10 && transported > 0;

        let probe_set = probes(&p, &ric, 200, seed);
        let qg = check_partial_qg(&p, &ric, &probe_set).unwrap();

        let mut bases = vec![];
        let mut rng = sampling::rng(seed + 1);
        let base_cfg = SamplerConfig::default().with_seed(seed + 2).with_count(20).with_radii(1e-2, 0.5);
        for k in sampling::stabilizing_gains(&p, &ric.k_star, &base_cfg).unwrap() {
            if lyapunov_variable(&p, &k).unwrap().pd && bases.len() < 5 {
                bases.push(k);
            }
        }
        if id == ExampleId::Ex31 {
            bases.push(p.zero_gain());
        }
        let mut sub_violations = 0;
        let mut sub_probes = 0;
        for (b, k) in bases.iter().enumerate() {
            let ps = probes(&p, &ric, 200, seed * 100 + b as u64);
            let rep = check_subgradient_ineq(&p, &ric, k, &ps).unwrap();
            sub_violations += rep.violations;
            sub_probes += rep.count;
        }

        let mut seg_infeasible = 0;
        let mut seg_chord = 0;
        let mut pairs = 0;
        while pairs < 50 && probe_set.len() >= 2 {
            let i = rng.random_range(0..probe_set.len());
            let j = rng.random_range(0..probe_set.len());
            if i == j {
                continue;
            }
            let rep = check_segment_convexity(&p, &ric.k_star, &probe_set[i], &probe_set[j], 10).unwrap();
            seg_infeasible += rep.infeasible;
            seg_chord += rep.chord_violations;
            pairs += 1;
        }

        let this_ok = transport_ok
            && qg.passes()
            && qg.count >= 100
            && sub_violations == 0
            && sub_probes >= 100 * bases.len()
            && pairs == 50
            && seg_infeasible == 0
            && seg_chord == 0;
        ok &= this_ok;
        lines.push(format!(
            "{id}: transport {transported} worst {transport_worst:.1e}, qg {}/{} min {:.1e}, subgrad {sub_violations}/{sub_probes} over {} bases, segments {pairs} ({seg_infeasible} infeasible, {seg_chord} chord)",
            qg.violations, qg.count, qg.min_margin, bases.len()
        ));
    }
    outcome(ok, lines.join("; "))
}

/// Central-difference Jacobian of `(Y, X) ↦ [vec(YX⁻¹ + K*); vec X]`,
/// using a general inverse so that asymmetric perturbations of `X` are
/// allowed.
fn fd_jacobian_pi(y: &Mat, x: &Mat, k_star: &Mat) -> Mat {
    let (m, n) = (y.nrows(), y.ncols());
    let dim = m * n + n * n;
    let eval = |v: &nalgebra::DVector<f64>| {
        let yy = Mat::from_column_slice(m, n, v.rows(0, m * n).as_slice());
        let xx = Mat::from_column_slice(n, n, v.rows(m * n, n * n).as_slice());
        let k = &yy * xx.clone().try_inverse().unwrap() + k_star;
        let mut out = nalgebra::DVector::zeros(dim);
        out.rows_mut(0, m * n).copy_from(&vec(&k));
        out.rows_mut(m * n, n * n).copy_from(&vec(&xx));
        out
    };
    let mut base = nalgebra::DVector::zeros(dim);
    base.rows_mut(0, m * n).copy_from(&vec(y));
    base.rows_mut(m * n, n * n).copy_from(&vec(x));
    let mut jac = Mat::zeros(dim, dim);
    for c in 0..dim {
        let h = 1e-6 * (1.0 + base[c].abs());
        let mut up = base.clone();
        up[c] += h;
        let mut dn = base.clone();
        dn[c] -= h;
        jac.set_column(c, &((eval(&up) - eval(&dn)) / (2.0 * h)));
    }
    jac
}

fn a9() -> Outcome {
    let mut rng = sampling::rng(9);
    let mut worst: f64 = 0.0;
    let mut structure_ok = true;
    for i in 0..50 {
        let n = 1 + i % 3;
        let m = 1 + (i / 3) % 2;
        let y = sampling::gaussian_matrix(&mut rng, m, n);
        let x = sampling::random_psd(&mut rng, n, n, 0.5);
        let k_star = sampling::gaussian_matrix(&mut rng, m, n);
        let g = jacobian_gamma(&LiftedPoint { y: y.clone(), x: x.clone() }).unwrap();
        structure_ok &= g.structure_exact();
        let fd = fd_jacobian_pi(&y, &x, &k_star);
        worst = worst.max((&g.gamma - &fd).norm() / g.gamma.norm());
    }
    outcome(
        worst <= 1e-6 && structure_ok,
        format!("50 points, worst rel err {worst:.2e}, structure exact: {structure_ok}"),
    )
}

fn orthogonal(rng: &mut impl Rng, n: usize) -> Mat {
    sampling::gaussian_matrix(rng, n, n).qr().q()
}

fn a10() -> Outcome {
    let mut rng = sampling::rng(10);
    let mut lines = Vec::new();
    let mut ok = true;
    for tm in [TimeModel::Ct, TimeModel::Dt] {
        let mut mono_bad = 0;
        let mut pd_mismatch = 0;
        let mut uncontrollable = 0;
        for i in 0..200 {
            let n = 2 + i % 3;
            let (a, w) = if i % 2 == 0 {
                // generic instance, W of random rank
                let rank = 1 + rng.random_range(0..n);
                (sampling::random_stable(&mut rng, n, tm).unwrap(), sampling::random_psd(&mut rng, n, rank, 0.0))
            } else {
                // invariant subspace not reached by W
                let n1 = 1 + rng.random_range(0..n - 1);
                let mut blk = Mat::zeros(n, n);
                blk.view_mut((0, 0), (n1, n1)).copy_from(&sampling::random_stable(&mut rng, n1, tm).unwrap());
                blk.view_mut((n1, n1), (n - n1, n - n1))
                    .copy_from(&sampling::random_stable(&mut rng, n - n1, tm).unwrap());
                blk.view_mut((0, n1), (n1, n - n1))
                    .copy_from(&sampling::gaussian_matrix(&mut rng, n1, n - n1));
                let mut w = Mat::zeros(n, n);
                w.view_mut((0, 0), (n1, n1)).copy_from(&sampling::random_psd(&mut rng, n1, n1, 0.1));
                let t = orthogonal(&mut rng, n);
                (&t * blk * t.transpose(), &t * w * t.transpose())
            };
            let x1 = solve_lyapunov(&a, &w, tm).unwrap();
            let extra = sampling::random_psd(&mut rng, n, 1 + i % n, 0.0);
            let x2 = solve_lyapunov(&a, &(&w + &extra), tm).unwrap();
            if lambda_min(&(&x2.x - &x1.x)) < -1e-10 * (1.0 + x2.x.norm()) {
                mono_bad += 1;
            }
            let ctrb = check_controllable(&a, &sqrt_psd(&w).unwrap()).unwrap();
            if !ctrb {
                uncontrollable += 1;
            }
            if ctrb != x1.pd {
                pd_mismatch += 1;
            }
        }
        ok &= mono_bad == 0 && pd_mismatch == 0 && uncontrollable > 0;
        lines.push(format!(
            "{tm}: monotonicity violations {mono_bad}, PD/controllability mismatches {pd_mismatch} ({uncontrollable} uncontrollable)"
        ));
    }
    outcome(ok, lines.join("; "))
}

struct RateRun {
    iterations: usize,
    gap: f64,
    fit: Option<lqrdom_core::optimize::RateFit>,
    error: Option<String>,
}

/// Descent with the log-gap fit over the final 80% of iterates whose gap
/// is above the roundoff floor.
fn rate_run(p: &Plant, ric: &RiccatiSolution, k0: &Mat) -> RateRun {
    let cfg = DescentConfig {
        tol_grad: Some(1e-9),
        max_iter: 10_000,
        ..DescentConfig::default()
    };
    let trace = match gradient_descent(p, k0, &cfg) {
        Ok(t) => t,
        Err(e) => {
            return RateRun { iterations: 0, gap: f64::NAN, fit: None, error: Some(e.to_string()) }
        }
    };
    let gaps: Vec<(f64, f64)> = trace
        .iterates
        .iter()
        .enumerate()
        .filter(|(_, it)| it.j - ric.j_star > 1e-12)
        .map(|(i, it)| (i as f64, (it.j - ric.j_star).ln()))
        .collect();
    let fit = fit_log_linear(&gaps[gaps.len() / 5..]);
    RateRun {
        iterations: trace.iterations(),
        gap: trace.last().j - ric.j_star,
        error: fit.as_ref().err().map(|e| e.to_string()),
        fit: fit.ok(),
    }
}

fn rate_ok(r: &RateRun) -> bool {
    r.gap <= 1e-10
        && r.iterations <= 10_000
        && r.fit.is_some_and(|f| f.r_squared >= 0.95 && f.slope < 0.0)
}

fn rate_line(r: &RateRun) -> String {
    match (&r.fit, &r.error) {
        (Some(f), _) => format!(
            "{} iterations, final gap {:.2e}, fit over {} points slope {:.3e} R^2 {:.4}",
            r.iterations, r.gap, f.points, f.slope, f.r_squared
        ),
        (None, e) => format!("{} iterations, final gap {:.2e}, no fit ({})", r.iterations, r.gap, e.clone().unwrap_or_default()),
    }
}

fn a11() -> Outcome {
    let (p, ric) = setup(ExampleId::Ex31);
    let k0 = p.zero_gain();
    let literal = rate_run(&p, &ric, &k0);
    if rate_ok(&literal) {
        return outcome(true, format!("K0 = 0: {}", rate_line(&literal)));
    }
    // On this plant the cost only sees the uncontrollable mode, so K* = 0
    // and the trace from K0 = 0 is empty. The rate is then measured from
    // displaced starts in the same sublevel geometry.
    let ev0 = evaluate(&p, &k0).unwrap();
    let k0_optimal = (ev0.j - ric.j_star).abs() <= 1e-10 && ev0.grad_norm() <= 1e-12 && literal.iterations == 0;
    if !k0_optimal {
        return outcome(false, format!("K0 = 0: {}", rate_line(&literal)));
    }
    let mut ok = true;
    let mut lines = vec![format!(
        "K0 = 0 is optimal (gap {:.1e}, grad {:.1e}, 0 iterations)",
        ev0.j - ric.j_star,
        ev0.grad_norm()
    )];
    for k0 in [[-2.0, -1.0], [0.3, 0.2], [-6.0, -8.0]] {
        let k0 = Mat::from_row_slice(1, 2, &k0);
        let run = rate_run(&p, &ric, &k0);
        ok &= rate_ok(&run);
        lines.push(format!("K0 = {:?}: {}", k0.as_slice(), rate_line(&run)));
    }
    outcome(ok, lines.join("; "))
}

fn a12() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for (id, seed) in [(ExampleId::Ex31, 121), (ExampleId::Ex33, 122)] {
        let (p, ric) = setup(id);
        let mut rng = sampling::rng(seed);
        let cfg = SamplerConfig::default().with_seed(seed).with_count(50);
        let mut samples = Vec::new();
        for k in sampling::stabilizing_gains(&p, &ric.k_star, &cfg).unwrap() {
            let rank = 1 + rng.random_range(0..p.n());
            let dw = sampling::random_psd(&mut rng, p.n(), rank, 0.0);
            for t in [0.0, 1e-3, 1e-2, 1e-1, 1.0] {
                let x = convexreform::inflate(&p, &k, t, &dw).unwrap();
                samples.push(InflatedSample { k: k.clone(), t, x });
            }
        }
        let rep = check_equivalence_eq_vs_ineq(&p, &samples).unwrap();
        ok &= rep.passes() && rep.margins.count == 250;
        lines.push(format!(
            "{id}: {} samples, min margin {:.2e}, {} violations, {} gains with minimum away from equality",
            rep.margins.count, rep.margins.min_margin, rep.margins.violations, rep.minimum_not_at_equality
        ));
    }
    outcome(ok, lines.join("; "))
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("A1", "scalar closed forms", a1),
        ("A2", "gradient vs finite differences", a2),
        ("A3", "gradient dominance on samples", a3),
        ("A4", "optimality-gap lower and upper bounds", a4),
        ("A5", "global discrete-time constant", a5),
        ("A6", "stabilizing set vs positive definite X_K", a6),
        ("A7", "non-unique optimum probe", a7),
        ("A8", "convex lift", a8),
        ("A9", "Jacobian of the inverse map", a9),
        ("A10", "Lyapunov monotonicity and definiteness", a10),
        ("A11", "linear convergence of gradient descent", a11),
        ("A12", "equation vs inequality formulation", a12),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let out = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !out.ok {
            failed += 1;
        }
        println!(
            "{id} {name}: {} ({}) [{:.2}s]",
            if out.ok { "PASS" } else { "FAIL" },
            out.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
