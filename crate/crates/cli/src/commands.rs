//! The `certify`, `solve`, `stability` and `inexact` commands.
//!
//! Each command returns an [`Outcome`] carrying the exit code, the report
//! and a short human-readable summary, and writes the report (plus the CSV
//! trace where there is one) into the report directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use certfix::engine::{
    error_floor, inexact_run, picard_run, BudgetShape, IterationTrace, NoiseBudget, NoiseSource,
    StopRule,
};
use certfix::funcspace::sup_distance;
use certfix::operators::{build_packet_with, DataPacket, PacketOptions};
use certfix::stability::two_sided_stability;
use certfix::Error;

use crate::document::{DocumentError, ProblemDocument, RuleSpec};
use crate::report::{
    ChecklistRow, ConstantsBlock, FailureBlock, InexactBlock, ReportDocument, StabilityBlock,
    TraceSummary,
};

/// Environment variable naming the default report directory.
pub const REPORT_DIR_ENV: &str = "CERTFIX_REPORT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_CERTIFICATION: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

/// Default number of sampled functions for the stability estimate.
pub const DEFAULT_SAMPLES: usize = 64;

/// Relative accuracy of reference fixed points used to measure observed
/// errors.
const REFERENCE_TOLERANCE: f64 = 1e-12;
const REFERENCE_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: ReportDocument,
    pub summary: String,
    pub report_path: Option<PathBuf>,
    pub csv_path: Option<PathBuf>,
}

/// `--out`, else `$CERTFIX_REPORT_DIR`, else the working directory.
pub fn report_dir(out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(REPORT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(
        || "problem".to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

/// Exit code for a failure raised by the core library.
fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Expression(_) => EXIT_PARSE,
        _ => EXIT_CERTIFICATION,
    }
}

struct Failure {
    code: i32,
    status: &'static str,
    message: String,
    checklist: Option<FailureBlock>,
}

impl From<DocumentError> for Failure {
    fn from(e: DocumentError) -> Self {
        Failure {
            code: EXIT_PARSE,
            status: "parse_error",
            message: e.to_string(),
            checklist: None,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let checklist = match &e {
            Error::Checklist(f) => Some(FailureBlock {
                item: f.item.to_string(),
                message: f.message.clone(),
                value: f.value,
            }),
            _ => None,
        };
        let code = exit_code_for(&e);
        Failure {
            code,
            status: if checklist.is_some() {
                "checklist_failure"
            } else if code == EXIT_PARSE {
                "expression_error"
            } else {
                "not_certified"
            },
            message: e.to_string(),
            checklist,
        }
    }
}

struct Loaded {
    doc: ProblemDocument,
    packet: DataPacket<f64>,
}

fn read_document(path: &Path) -> Result<ProblemDocument, Failure> {
    let src = fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_PARSE,
        status: "parse_error",
        message: format!("cannot read {}: {e}", path.display()),
        checklist: None,
    })?;
    Ok(ProblemDocument::parse(&src)?)
}

fn certify_document(
    doc: &ProblemDocument,
    seed: u64,
    radius: Option<f64>,
    report: &mut ReportDocument,
) -> Result<DataPacket<f64>, Failure> {
    report.warnings.extend(doc.warnings());
    let op = doc.operator()?;
    let x0 = doc.start(*op.grid())?;
    let opts = PacketOptions {
        seed,
        radius,
        ..PacketOptions::default()
    };
    let packet = build_packet_with(&op, &x0, &opts)?;
    report.checklist = packet
        .checklist()
        .iter()
        .map(ChecklistRow::from_entry)
        .collect();
    report.constants = Some(ConstantsBlock::from_packet(&packet));
    Ok(packet)
}

fn load(path: &Path, seed: Option<u64>, report: &mut ReportDocument) -> Result<Loaded, Failure> {
    let doc = read_document(path)?;
    let seed = seed.or(doc.seed).unwrap_or(0);
    report.seed = seed;
    let packet = certify_document(&doc, seed, None, report)?;
    Ok(Loaded { doc, packet })
}

fn fail(mut report: ReportDocument, f: Failure) -> (ReportDocument, String) {
    report.exit_code = f.code;
    report.status = f.status.to_string();
    report.error = Some(f.message.clone());
    let summary = match &f.checklist {
        Some(c) => format!("certification failed: {}: {}", c.item, c.message),
        None => format!("{}: {}", f.status.replace('_', " "), f.message),
    };
    report.failure = f.checklist;
    (report, summary)
}

fn finish(
    report: ReportDocument,
    summary: String,
    dir: &Path,
    name: &str,
    csv: Option<(PathBuf, &IterationTrace<f64>)>,
) -> anyhow::Result<Outcome> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_path = match csv {
        Some((path, trace)) => {
            let file =
                fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            crate::report::write_trace_csv(trace, file)?;
            Some(path)
        }
        None => None,
    };
    let report_path = dir.join(format!("{name}.json"));
    fs::write(&report_path, report.to_json() + "\n")
        .with_context(|| format!("writing {}", report_path.display()))?;
    Ok(Outcome {
        exit_code: report.exit_code,
        report,
        summary,
        report_path: Some(report_path),
        csv_path,
    })
}

fn constants_summary(p: &DataPacket<f64>) -> String {
    let c = p.constants();
    format!(
        "κ={} (L_f={}, M={}), R={}, δ0={}",
        p.kappa(),
        c.lip_f,
        c.kernel_bound,
        c.radius,
        c.delta0
    )
}

pub fn cmd_certify(
    problem: &Path,
    seed: Option<u64>,
    out: Option<&Path>,
) -> anyhow::Result<Outcome> {
    let mut report = ReportDocument::new("certify", vec![problem.display().to_string()], 0);
    let (report, summary) = match load(problem, seed, &mut report) {
        Ok(l) => {
            report.status = "certified".into();
            let summary = format!("certified: {}", constants_summary(&l.packet));
            (report, summary)
        }
        Err(f) => fail(report, f),
    };
    finish(
        report,
        summary,
        &report_dir(out),
        &format!("{}-certify", stem(problem)),
        None,
    )
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub eps: Option<f64>,
    pub rule: Option<RuleSpec>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
}

pub fn cmd_solve(
    problem: &Path,
    opts: &SolveOptions,
    out: Option<&Path>,
) -> anyhow::Result<Outcome> {
    let mut report = ReportDocument::new("solve", vec![problem.display().to_string()], 0);
    let dir = report_dir(out);
    let name = stem(problem);
    let loaded = match load(problem, opts.seed, &mut report) {
        Ok(l) => l,
        Err(f) => {
            let (report, summary) = fail(report, f);
            return finish(report, summary, &dir, &format!("{name}-solve"), None);
        }
    };
    let rule = loaded.doc.stop_rule(opts.rule, opts.eps);
    let max_iter = loaded.doc.max_iter(opts.max_iter);
    let run = match loaded.doc.noise_budget(report.seed) {
        Ok(Some(budget)) => inexact_run(&loaded.packet, &budget, rule, max_iter),
        Ok(None) => picard_run(&loaded.packet, rule, max_iter),
        Err(e) => {
            let (report, summary) = fail(report, e.into());
            return finish(report, summary, &dir, &format!("{name}-solve"), None);
        }
    };
    let trace = match run {
        Ok(t) => t,
        Err(e) => {
            let (report, summary) = fail(report, e.into());
            return finish(report, summary, &dir, &format!("{name}-solve"), None);
        }
    };
    let csv = dir.join(format!("{name}-trace.csv"));
    report.trace = Some(TraceSummary::from_trace(
        &trace,
        max_iter,
        Some(csv.display().to_string()),
    ));
    let summary = if trace.complete {
        report.status = "solved".into();
        format!(
            "solved in {} steps ({} rule): certified error {:e}",
            trace.steps,
            rule.name(),
            trace.certified_error
        )
    } else {
        report.status = "budget_exhausted".into();
        report.exit_code = EXIT_BUDGET;
        format!(
            "iteration budget of {max_iter} steps exhausted: certified error {:e}",
            trace.certified_error
        )
    };
    finish(
        report,
        summary,
        &dir,
        &format!("{name}-solve"),
        Some((csv, &trace)),
    )
}

/// Noise selection for `inexact`; at most one field is set.
#[derive(Debug, Clone, Default)]
pub struct InexactOptions {
    pub eta_bar: Option<f64>,
    pub eta_seq: Option<Vec<f64>>,
    pub quadrature: bool,
    pub steps: usize,
    pub seed: Option<u64>,
}

pub fn cmd_inexact(
    problem: &Path,
    opts: &InexactOptions,
    out: Option<&Path>,
) -> anyhow::Result<Outcome> {
    let mut report = ReportDocument::new("inexact", vec![problem.display().to_string()], 0);
    let dir = report_dir(out);
    let name = stem(problem);
    let result = (|| -> Result<(IterationTrace<f64>, InexactBlock), Failure> {
        let loaded = load(problem, opts.seed, &mut report)?;
        let seed = report.seed;
        let budget = if opts.quadrature {
            NoiseBudget::quadrature()
        } else if let Some(e) = opts.eta_bar {
            NoiseBudget::injected(BudgetShape::Constant(e), seed)
        } else if let Some(seq) = &opts.eta_seq {
            NoiseBudget::injected(BudgetShape::Sequence(seq.clone()), seed)
        } else {
            loaded
                .doc
                .noise_budget(seed)?
                .unwrap_or_else(|| NoiseBudget::injected(BudgetShape::Constant(0.0), seed))
        };
        let p = &loaded.packet;
        let trace = inexact_run(
            p,
            &budget,
            StopRule::FixedCount(opts.steps),
            opts.steps.max(1),
        )?;
        let eta_bar = match budget.source {
            NoiseSource::Injected { .. } => budget.shape.sup(),
            NoiseSource::QuadratureEstimated => {
                trace.rows.iter().map(|r| r.eta).fold(0.0, f64::max)
            }
        };
        let floor = error_floor(p.kappa(), eta_bar)?;

        let scale = 1f64.max(p.constants().radius);
        let reference = picard_run(
            p,
            StopRule::Residual(REFERENCE_TOLERANCE * scale),
            REFERENCE_MAX_ITER,
        )?;
        let window = (trace.iterates.len() / 4).max(1);
        let (observed, reference_error) = if reference.complete {
            let worst = trace.iterates[trace.iterates.len() - window..]
                .iter()
                .map(|x| sup_distance(x, &reference.iterate))
                .collect::<certfix::Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            (Some(worst), Some(reference.certified_error))
        } else {
            (None, None)
        };
        Ok((
            trace,
            InexactBlock {
                noise_source: match budget.source {
                    NoiseSource::Injected { .. } => "injected",
                    NoiseSource::QuadratureEstimated => "quadrature",
                }
                .to_string(),
                eta_bar,
                error_floor: floor,
                steps: opts.steps,
                steady_window: window,
                observed_steady_error: observed,
                reference_error,
            },
        ))
    })();
    match result {
        Ok((trace, block)) => {
            let csv = dir.join(format!("{name}-inexact-trace.csv"));
            report.trace = Some(TraceSummary::from_trace(
                &trace,
                opts.steps.max(1),
                Some(csv.display().to_string()),
            ));
            report.status = "completed".into();
            let summary = format!(
                "{} inexact steps: η̄={:e}, error floor {:e}{}",
                opts.steps,
                block.eta_bar,
                block.error_floor,
                block
                    .observed_steady_error
                    .map_or(String::new(), |e| format!(", observed steady error {e:e}"))
            );
            report.inexact = Some(block);
            finish(
                report,
                summary,
                &dir,
                &format!("{name}-inexact"),
                Some((csv, &trace)),
            )
        }
        Err(f) => {
            let (report, summary) = fail(report, f);
            finish(report, summary, &dir, &format!("{name}-inexact"), None)
        }
    }
}

pub fn cmd_stability(
    problem_a: &Path,
    problem_b: &Path,
    samples: usize,
    seed: Option<u64>,
    out: Option<&Path>,
) -> anyhow::Result<Outcome> {
    let mut report = ReportDocument::new(
        "stability",
        vec![
            problem_a.display().to_string(),
            problem_b.display().to_string(),
        ],
        0,
    );
    let name = format!("{}-vs-{}-stability", stem(problem_a), stem(problem_b));
    let result = (|| -> Result<StabilityBlock, Failure> {
        let doc_a = read_document(problem_a)?;
        let doc_b = read_document(problem_b)?;
        let seed = seed.or(doc_a.seed).unwrap_or(0);
        report.seed = seed;
        let grid_a = doc_a.grid()?;
        let grid_b = doc_b.grid()?;
        if grid_a != grid_b {
            return Err(Error::GridMismatch(format!(
                "problems live on different grids ({} vs {} nodes)",
                grid_a.size(),
                grid_b.size()
            ))
            .into());
        }
        // certify each on its own ball, then both on the larger one
        let mut scratch = ReportDocument::new("stability", Vec::new(), seed);
        let ra = certify_document(&doc_a, seed, None, &mut scratch)?
            .constants()
            .radius;
        let rb = certify_document(&doc_b, seed, None, &mut scratch)?
            .constants()
            .radius;
        let shared = ra.max(rb);
        let pa = certify_document(&doc_a, seed, Some(shared), &mut report)?;
        let mut scratch = ReportDocument::new("stability", Vec::new(), seed);
        let pb = certify_document(&doc_b, seed, Some(shared), &mut scratch)?;
        report.warnings.extend(scratch.warnings);
        let r = two_sided_stability(&pa, &pb, samples, seed)?;
        Ok(StabilityBlock::from_report(&r, shared, samples))
    })();
    let (report, summary) = match result {
        Ok(block) => {
            let summary = format!(
                "ε estimate {:e} ({} bound {:e}), κ={}, stability bound {:e}, observed gap {:e}",
                block.eps_estimate,
                block.eps_source,
                block.eps_analytic.unwrap_or(block.eps_estimate),
                block.kappa,
                block.stab_bound,
                block.observed_gap.unwrap_or(f64::NAN),
            );
            let holds = block.bound_holds;
            report.stability = Some(block);
            if holds {
                report.status = "bound_holds".into();
            } else {
                report.status = "bound_violated".into();
                report.exit_code = EXIT_CERTIFICATION;
            }
            (report, summary)
        }
        Err(f) => fail(report, f),
    };
    finish(report, summary, &report_dir(out), &name, None)
}
