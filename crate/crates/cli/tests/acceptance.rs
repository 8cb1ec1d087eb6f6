//! Acceptance suite. Runs without the libtest harness so that every criterion
//! prints its PASS/FAIL line, and exits nonzero if any criterion fails.

use std::cell::Cell;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use certfix::engine::{
    inexact_run, picard_run, residual_to_error, BudgetShape, NoiseBudget, StopRule,
};
use certfix::funcspace::{sup_distance, Grid, GridFunction, Interval};
use certfix::gauge::{n_geo, phi_geo, CustomGauge, Gauge, PowerDefect};
use certfix::operators::{
    build_packet, dirichlet_green_value, gauge_dominance_check, kernel_bound_h,
    order_interval_check, ControlMode, FixedPointOperator, Kernel, Nonlinearity,
    OrderIntervalVerdict, Profile,
};
use certfix::stability::{epsilon_sup, sharpness_demo};
use certfix::Error;
use certfix_cli::{cmd_certify, cmd_stability, EXIT_CERTIFICATION};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

const RADIUS_TOL: f64 = 1e-12;
const KERNEL_BOUND_TOL: f64 = 1e-6;
const TRUE_ERROR_SLACK: f64 = 1e-5;
const REFERENCE_GRID_TOL: f64 = 1e-6;
const MOMENT_TOL: f64 = 1e-12;
const SHARPNESS_TOL: f64 = 1e-12;
const EPSILON_SUP_TOL: f64 = 1e-9;
const FLOOR_SLACK: f64 = 1e-12;
const FLOOR_MINIMUM: f64 = 0.002;
const ORDERING_SLACK: f64 = 1e-12;
const DIRICHLET_KAPPA_TOL: f64 = 1e-4;
const DIRICHLET_SOLUTION_TOL: f64 = 1e-4;
const SECOND_DIFFERENCE_TOL: f64 = 1e-3;
const ORDER_TOL: f64 = 1e-12;

const ONE_SECOND: Duration = Duration::from_secs(1);
const FIVE_SECONDS: Duration = Duration::from_secs(5);

type Outcome = Result<String, String>;
/// Name, optional runtime limit and check.
type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("problems")
        .join(name)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn worked(m: usize) -> Result<FixedPointOperator<f64>, String> {
    FixedPointOperator::hammerstein(
        Grid::new(Interval::unit(), m).map_err(|e| e.to_string())?,
        Profile::parse("t").map_err(|e| e.to_string())?,
        Kernel::separable_from_strings(&[("t", "1"), ("1", "s")]).map_err(|e| e.to_string())?,
        Nonlinearity::linear(1.0 / 3.0),
    )
    .map_err(|e| e.to_string())
}

fn reference(t: f64) -> f64 {
    (90.0 * t + 12.0) / 71.0
}

fn worked_certificate() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out =
        cmd_certify(&problem("worked.toml"), None, Some(dir.path())).map_err(|e| e.to_string())?;
    ensure(out.exit_code == 0, || {
        format!("exit code {}", out.exit_code)
    })?;
    let c = out.report.constants.ok_or("no constants block")?;
    ensure(c.kappa == 0.5, || format!("κ = {:e}", c.kappa))?;
    ensure(c.modulus_method == "Analytic", || {
        format!("modulus method {}", c.modulus_method)
    })?;
    ensure((c.radius - 2.0).abs() <= RADIUS_TOL, || {
        format!("R = {:e}", c.radius)
    })?;
    let grid = Grid::new(Interval::unit(), 401).map_err(|e| e.to_string())?;
    let kernel = Kernel::<f64>::parse_expression("t + s").map_err(|e| e.to_string())?;
    let m = kernel_bound_h(&kernel, grid).map_err(|e| e.to_string())?;
    ensure((m - 1.5).abs() <= KERNEL_BOUND_TOL, || {
        format!("kernel bound {m}")
    })?;
    Ok(format!("κ={} R={} M={m:.9}", c.kappa, c.radius))
}

/// Solves the two moment equations for `A = ∫x` and `B = ∫s·x` that the
/// degenerate kernel reduces the problem to, and returns the slope and
/// intercept of `x(t) = t·(1 + A/3) + B/3`.
fn moment_solution() -> (f64, f64) {
    // A = 1/2 + (A/2 + B)/3,  B = 1/3 + (A/3 + B/2)/3
    let (a11, a12, b1) = (1.0 - 1.0 / 6.0, -1.0 / 3.0, 0.5);
    let (a21, a22, b2) = (-1.0 / 9.0, 1.0 - 1.0 / 6.0, 1.0 / 3.0);
    let det = a11 * a22 - a12 * a21;
    let a = (b1 * a22 - a12 * b2) / det;
    let b = (a11 * b2 - a21 * b1) / det;
    (1.0 + a / 3.0, b / 3.0)
}

fn reference_convergence() -> Outcome {
    let (slope, intercept) = moment_solution();
    ensure(
        (slope - 90.0 / 71.0).abs() <= MOMENT_TOL && (intercept - 12.0 / 71.0).abs() <= MOMENT_TOL,
        || format!("moment system gives {slope}·t + {intercept}"),
    )?;

    let fine = worked(4001)?;
    let p = build_packet(&fine, &GridFunction::zero(*fine.grid())).map_err(|e| e.to_string())?;
    let tr = picard_run(&p, StopRule::Residual(1e-12), 200).map_err(|e| e.to_string())?;
    let want = GridFunction::from_fn(*fine.grid(), reference).map_err(|e| e.to_string())?;
    let fine_gap = sup_distance(&tr.iterate, &want).map_err(|e| e.to_string())?;
    ensure(fine_gap <= REFERENCE_GRID_TOL, || {
        format!("m=4001 run is {fine_gap:e} from x*")
    })?;

    let op = worked(401)?;
    let p = build_packet(&op, &GridFunction::zero(*op.grid())).map_err(|e| e.to_string())?;
    let tr = picard_run(&p, StopRule::FixedCount(30), 31).map_err(|e| e.to_string())?;
    let want = GridFunction::from_fn(*op.grid(), reference).map_err(|e| e.to_string())?;
    let mut worst_margin = f64::INFINITY;
    for (n, x) in tr.iterates.iter().enumerate() {
        let err = sup_distance(x, &want).map_err(|e| e.to_string())?;
        let apriori = phi_geo(n, 0.5, p.delta0()).map_err(|e| e.to_string())?;
        ensure(err <= apriori + TRUE_ERROR_SLACK, || {
            format!("n={n}: error {err:e} > Φ_geo {apriori:e}")
        })?;
        if let Some(row) = tr.rows.get(n) {
            let cert = residual_to_error(row.residual, p.kappa()).map_err(|e| e.to_string())?;
            ensure(err <= cert + TRUE_ERROR_SLACK, || {
                format!("n={n}: error {err:e} > r_n/(1−κ) {cert:e}")
            })?;
        }
        worst_margin = worst_margin.min(apriori + TRUE_ERROR_SLACK - err);
    }
    Ok(format!(
        "steps 0..=30 checked, m=4001 gap {fine_gap:.2e}, least margin {worst_margin:.2e}"
    ))
}

/// Smallest `n` with `κⁿ·δ0/(1−κ) ≤ ε`, found by counting.
fn n_geo_by_scan(eps: f64, kappa: f64, delta0: f64) -> usize {
    let mut n = 0;
    let mut bound = delta0 / (1.0 - kappa);
    while bound > eps {
        bound *= kappa;
        n += 1;
    }
    n
}

fn stopping_soundness() -> Outcome {
    let closed = n_geo(1e-6, 0.5, 1.0).map_err(|e| e.to_string())?;
    let scanned = n_geo_by_scan(1e-6, 0.5, 1.0);
    ensure(closed == 21 && scanned == 21, || {
        format!("n_geo = {closed}, scan = {scanned}")
    })?;

    let op = worked(401)?;
    let p = build_packet(&op, &GridFunction::zero(*op.grid())).map_err(|e| e.to_string())?;
    let want = GridFunction::from_fn(*op.grid(), reference).map_err(|e| e.to_string())?;
    let mut seen = Vec::new();
    for eps in [1e-2, 1e-4, 1e-6] {
        let n = n_geo(eps, p.kappa(), p.delta0()).map_err(|e| e.to_string())?;
        let scanned = n_geo_by_scan(eps, p.kappa(), p.delta0());
        ensure(n == scanned, || {
            format!("ε={eps:e}: n_geo {n} but scan {scanned}")
        })?;
        let tr = picard_run(&p, StopRule::FixedCount(n), n + 1).map_err(|e| e.to_string())?;
        let err = sup_distance(&tr.iterate, &want).map_err(|e| e.to_string())?;
        ensure(err <= eps + TRUE_ERROR_SLACK, || {
            format!("ε={eps:e}: error {err:e} after {n} steps")
        })?;
        seen.push(format!("{eps:e}→{n}"));
    }
    Ok(format!("n_geo(1e-6,0.5,1)=21; {}", seen.join(", ")))
}

fn sharpness() -> Outcome {
    let mut ratios = Vec::new();
    for kappa in [0.0f64, 0.25, 0.5, 0.9, 0.99] {
        let demo = sharpness_demo(kappa, 0.1).map_err(|e| e.to_string())?;
        let ratio = demo.gap / demo.bound;
        ensure((ratio - 1.0).abs() <= SHARPNESS_TOL, || {
            format!("κ={kappa}: gap/bound = {ratio}")
        })?;
        ratios.push((ratio - 1.0).abs());
    }
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(format!("worst |gap/bound − 1| = {worst:.1e}"))
}

fn stability() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = cmd_stability(
        &problem("worked.toml"),
        &problem("worked_shifted.toml"),
        64,
        None,
        Some(dir.path()),
    )
    .map_err(|e| e.to_string())?;
    ensure(out.exit_code == 0, || {
        format!("exit code {}", out.exit_code)
    })?;
    let s = out.report.stability.ok_or("no stability block")?;
    let gap = s.observed_gap.ok_or("no observed gap")?;
    ensure(gap <= 0.1 + TRUE_ERROR_SLACK, || format!("gap {gap}"))?;

    let t = worked(401)?;
    let shifted = FixedPointOperator::hammerstein(
        *t.grid(),
        Profile::parse("t + 0.05").map_err(|e| e.to_string())?,
        Kernel::separable_from_strings(&[("t", "1"), ("1", "s")]).map_err(|e| e.to_string())?,
        Nonlinearity::linear(1.0 / 3.0),
    )
    .map_err(|e| e.to_string())?;
    let p = build_packet(&t, &GridFunction::zero(*t.grid())).map_err(|e| e.to_string())?;
    let eps = epsilon_sup(&t, &shifted, p.region(), 64, 0).map_err(|e| e.to_string())?;
    ensure((eps - 0.05).abs() <= EPSILON_SUP_TOL, || {
        format!("epsilon_sup = {eps}")
    })?;
    ensure((s.eps_estimate - 0.05).abs() <= EPSILON_SUP_TOL, || {
        format!("reported ε = {}", s.eps_estimate)
    })?;
    Ok(format!(
        "gap {gap:.6} ≤ bound {:.6}, epsilon_sup {eps:.12}",
        s.stab_bound
    ))
}

fn error_floor() -> Outcome {
    let op = FixedPointOperator::affine_scalar(0.5, 0.0).map_err(|e| e.to_string())?;
    let p = build_packet(&op, &GridFunction::zero(*op.grid())).map_err(|e| e.to_string())?;
    let budget = NoiseBudget::injected(BudgetShape::Constant(0.01), 0);
    let tr = inexact_run(&p, &budget, StopRule::FixedCount(200), 200).map_err(|e| e.to_string())?;
    ensure(tr.iterates.len() == 201, || {
        format!("{} iterates", tr.iterates.len())
    })?;
    // the fixed point of x ↦ x/2 is 0
    let steady = tr.iterates[tr.iterates.len() - 50..]
        .iter()
        .map(|x| x.sup_norm())
        .fold(0.0, f64::max);
    ensure(steady <= 0.02 + FLOOR_SLACK, || {
        format!("steady error {steady}")
    })?;
    ensure(steady >= FLOOR_MINIMUM, || {
        format!("steady error {steady} is vacuous")
    })?;
    Ok(format!("steady error {steady:.6} in [0.002, 0.02]"))
}

/// `ω(r) = q·r·(1 + r/(1+r))/2`, a nonlinear gauge with ratio rising to `q`.
#[derive(Debug)]
struct Saturating {
    q: f64,
}

impl CustomGauge<f64> for Saturating {
    fn eval(&self, r: f64) -> f64 {
        self.q * r * (1.0 + r / (1.0 + r)) / 2.0
    }

    fn ratio_nondecreasing(&self) -> bool {
        true
    }

    fn parameters(&self) -> Vec<f64> {
        vec![self.q]
    }
}

fn bound_ordering() -> Outcome {
    let gauges = prop_oneof![
        (0.0..0.999f64).prop_map(|q| Gauge::geometric(q).unwrap()),
        (1e-3..=1.0f64).prop_map(|c| Gauge::linear_defect(c).unwrap()),
        (0.01..0.999f64).prop_map(|q| Gauge::custom(Arc::new(Saturating { q })).unwrap()),
    ];
    let strategy = (gauges, 0usize..400, 1e-3..1e3f64, 0.0..=1.0f64);
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let cases = Cell::new(0usize);
    let result = runner.run(&strategy, |(gauge, n, radius, frac)| {
        cases.set(cases.get() + 1);
        let modulus = gauge.certify_modulus(radius).unwrap();
        let delta0 = frac * radius;
        let tail = gauge.tail_bound(n, delta0, &modulus).unwrap();
        let geo = phi_geo(n, modulus.kappa(), delta0).unwrap();
        prop_assert!(
            tail <= geo * (1.0 + ORDERING_SLACK),
            "Φ_ω {} > Φ_geo {}",
            tail,
            geo
        );
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok(format!("{} triples, zero violations", cases.get()))
}

fn dirichlet() -> Outcome {
    let grid = Grid::<f64>::new(Interval::unit(), 401).map_err(|e| e.to_string())?;
    let op = FixedPointOperator::dirichlet(grid, 0.0, 1.0, Nonlinearity::linear(1.0))
        .map_err(|e| e.to_string())?;
    let p = build_packet(&op, &GridFunction::zero(grid)).map_err(|e| e.to_string())?;
    ensure((p.kappa() - 0.125).abs() <= DIRICHLET_KAPPA_TOL, || {
        format!("κ = {}", p.kappa())
    })?;

    // midpoint-rule oracle for sup_t ∫|G(t,s)| ds, independent of the solver's trapezoid tables
    let unit = Interval::unit();
    let fine = 2000;
    let oracle = (0..=200)
        .map(|i| {
            let t = i as f64 / 200.0;
            (0..fine)
                .map(|j| dirichlet_green_value(&unit, t, (j as f64 + 0.5) / fine as f64).abs())
                .sum::<f64>()
                / fine as f64
        })
        .fold(0.0, f64::max);
    ensure((oracle - 0.125).abs() <= DIRICHLET_KAPPA_TOL, || {
        format!("quadrature oracle M_G = {oracle}")
    })?;

    let tr = picard_run(&p, StopRule::Residual(1e-10), 500).map_err(|e| e.to_string())?;
    let exact =
        GridFunction::from_fn(grid, |t: f64| t.sinh() / 1f64.sinh()).map_err(|e| e.to_string())?;
    let err = sup_distance(&tr.iterate, &exact).map_err(|e| e.to_string())?;
    ensure(err <= DIRICHLET_SOLUTION_TOL, || {
        format!("sup error vs sinh {err:e}")
    })?;

    let h = grid.step();
    let x = tr.iterate.values();
    let residual = (1..x.len() - 1)
        .map(|i| ((x[i + 1] - 2.0 * x[i] + x[i - 1]) / (h * h) - x[i]).abs())
        .fold(0.0, f64::max);
    ensure(residual <= SECOND_DIFFERENCE_TOL, || {
        format!("second-difference residual {residual:e}")
    })?;
    Ok(format!(
        "κ={:.6} oracle={oracle:.6} error {err:.1e} x''−x {residual:.1e}",
        p.kappa()
    ))
}

fn rejection() -> Outcome {
    let gauge = Gauge::custom(Arc::new(PowerDefect { c: 0.5 })).map_err(|e| e.to_string())?;
    match gauge.certify_modulus(1.0) {
        Err(Error::NotCertifiable { reason }) => {
            ensure(reason.contains("sup ratio reaches 1"), || {
                format!("refusal reason {reason:?}")
            })?
        }
        other => return Err(format!("power defect gauge was not refused: {other:?}")),
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let doc = dir.path().join("nonexpansive.toml");
    let src = fs::read_to_string(problem("worked.toml"))
        .map_err(|e| e.to_string())?
        .replace(
            "kernel_terms = [[\"t\", \"1\"], [\"1\", \"s\"]]",
            "kernel = \"1\"",
        )
        .replace("expr = \"u/3\"", "expr = \"u\"")
        .replace("lip = \"1/3\"", "lip = 1.0");
    fs::write(&doc, src).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    for path in [doc, problem("affine_nonexpansive.toml")] {
        let out = cmd_certify(&path, None, Some(dir.path())).map_err(|e| e.to_string())?;
        let item = out.report.failure.map(|f| f.item).unwrap_or_default();
        ensure(out.exit_code == EXIT_CERTIFICATION && item == "C4", || {
            format!(
                "{}: exit {} failing item {item:?}",
                path.display(),
                out.exit_code
            )
        })?;
        failures.push(item);
    }
    Ok(format!(
        "power defect refused; L=1 problems fail {}",
        failures.join(", ")
    ))
}

fn order_interval() -> Outcome {
    let grid = Grid::new(Interval::unit(), 201).map_err(|e| e.to_string())?;
    let op = FixedPointOperator::volterra(
        grid,
        Profile::parse("t").map_err(|e| e.to_string())?,
        Kernel::parse_expression("exp(s - t)").map_err(|e| e.to_string())?,
        Nonlinearity::parse_expression("atan(u)/2 + u/4", 0.75, 0.0).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let (lo, hi) = (0.0, 4.0);
    let lower = GridFunction::constant(grid, lo);
    let upper = GridFunction::constant(grid, hi);
    let r = order_interval_check(&op, &lower, &upper, 100, 0).map_err(|e| e.to_string())?;
    ensure(r.verdict == OrderIntervalVerdict::Invariant, || {
        format!("verdict {:?}", r.verdict)
    })?;
    ensure(r.samples_checked == 100, || {
        format!("{} samples", r.samples_checked)
    })?;

    // a second, deterministic family of functions between the bounds
    let mut violations = 0;
    for k in 0..100 {
        let level = k as f64 / 99.0;
        let x = GridFunction::from_fn(grid, |t: f64| {
            hi * level * (0.5 + 0.5 * (7.0 * k as f64 * t).sin())
        })
        .map_err(|e| e.to_string())?;
        let tx = op.apply(&x).map_err(|e| e.to_string())?;
        violations += tx
            .values()
            .iter()
            .filter(|&&v| v < lo - ORDER_TOL || v > hi + ORDER_TOL)
            .count();
    }
    ensure(violations == 0, || {
        format!("{violations} pointwise violations")
    })?;
    Ok(format!(
        "200 samples, zero violations, worst margin {:.4}",
        r.worst_margin
    ))
}

fn dominance() -> Outcome {
    let op = worked(401)?;
    let p = build_packet(&op, &GridFunction::zero(*op.grid())).map_err(|e| e.to_string())?;
    let check = |q: f64| {
        let g = Gauge::geometric(q).map_err(|e| e.to_string())?;
        gauge_dominance_check(&op, &g, p.region(), ControlMode::TwoPoint, 24, 0)
            .map_err(|e| e.to_string())
    };
    let accept = check(0.5)?;
    ensure(accept.consistent, || {
        format!("Geometric(0.5) rejected at ratio {}", accept.max_ratio)
    })?;
    let reject = check(0.4)?;
    ensure(!reject.consistent, || {
        format!("Geometric(0.4) accepted at ratio {}", reject.max_ratio)
    })?;
    let (x, y) = reject.witness.ok_or("no witness pair")?;
    let image_gap = sup_distance(
        &op.apply(&x).map_err(|e| e.to_string())?,
        &op.apply(&y).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let ratio = image_gap / sup_distance(&x, &y).map_err(|e| e.to_string())?;
    ensure(ratio > 0.4, || format!("witness reproduces ratio {ratio}"))?;
    Ok(format!(
        "0.5 accepted (max {:.4}), 0.4 rejected, witness ratio {ratio:.4}",
        accept.max_ratio
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        (
            "worked example certificate",
            Some(ONE_SECOND),
            worked_certificate,
        ),
        (
            "reference-solution convergence",
            Some(FIVE_SECONDS),
            reference_convergence,
        ),
        ("stopping-rule soundness", None, stopping_soundness),
        ("sharpness equality", Some(ONE_SECOND), sharpness),
        ("stability soundness", Some(FIVE_SECONDS), stability),
        ("error floor", Some(ONE_SECOND), error_floor),
        ("bound ordering", None, bound_ordering),
        ("dirichlet problem", Some(FIVE_SECONDS), dirichlet),
        ("rejection behavior", None, rejection),
        ("monotone invariance", None, order_interval),
        ("gauge dominance diagnostics", None, dominance),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = check();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, limit) {
            if elapsed > *limit {
                outcome = Err(format!("took {elapsed:.2?}, limit {limit:?}"));
            }
        }
        match outcome {
            Ok(detail) => println!(
                "criterion {:2} {name}: PASS ({detail}; {elapsed:.2?})",
                i + 1
            ),
            Err(why) => {
                failed += 1;
                println!("criterion {:2} {name}: FAIL ({why}; {elapsed:.2?})", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
