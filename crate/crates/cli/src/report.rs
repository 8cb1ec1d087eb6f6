//! Machine-readable run reports (JSON) and per-step traces (CSV).

use std::collections::BTreeMap;
use std::io::Write;

use certfix::engine::{IterationTrace, StopReason, StopRule};
use certfix::operators::{ChecklistEntry, DataPacket, Verdict};
use certfix::stability::PerturbationReport;
use serde::{Deserialize, Serialize};

/// Labels the sampled `ε` so it is never mistaken for a certified value.
pub const EPS_ESTIMATE_LABEL: &str = "sampled lower estimate of sup_x d(Tx, Sx)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub command: String,
    pub problems: Vec<String>,
    pub status: String,
    pub exit_code: i32,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checklist: Vec<ChecklistRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inexact: Option<InexactBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityBlock>,
}

impl ReportDocument {
    pub fn new(command: &str, problems: Vec<String>, seed: u64) -> Self {
        ReportDocument {
            command: command.to_string(),
            problems,
            status: String::new(),
            exit_code: 0,
            seed,
            warnings: Vec::new(),
            error: None,
            checklist: Vec::new(),
            failure: None,
            constants: None,
            trace: None,
            inexact: None,
            stability: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChecklistRow {
    pub item: String,
    pub topic: String,
    pub verdict: String,
    pub detail: String,
    pub evidence: BTreeMap<String, f64>,
}

impl ChecklistRow {
    pub fn from_entry(e: &ChecklistEntry<f64>) -> Self {
        ChecklistRow {
            item: e.item.to_string(),
            topic: e.item.topic().to_string(),
            verdict: match e.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "fail",
                Verdict::NotApplicable => "n/a",
            }
            .to_string(),
            detail: e.detail.clone(),
            evidence: e
                .evidence
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureBlock {
    pub item: String,
    pub message: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsBlock {
    pub operator: String,
    pub grid_size: usize,
    pub lip_f: f64,
    pub kernel_bound: f64,
    pub lipschitz: f64,
    pub kappa: f64,
    pub modulus_method: String,
    pub modulus_radius: f64,
    pub radius: f64,
    pub forcing_norm: f64,
    pub zero_bound: f64,
    pub delta0: f64,
}

impl ConstantsBlock {
    pub fn from_packet(p: &DataPacket<f64>) -> Self {
        let c = p.constants();
        ConstantsBlock {
            operator: p.operator().kind().name().to_string(),
            grid_size: p.operator().grid().size(),
            lip_f: c.lip_f,
            kernel_bound: c.kernel_bound,
            lipschitz: c.lipschitz,
            kappa: p.kappa(),
            modulus_method: format!("{:?}", p.modulus().method()),
            modulus_radius: p.modulus().radius(),
            radius: c.radius,
            forcing_norm: c.forcing_norm,
            zero_bound: c.zero_bound,
            delta0: c.delta0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub max_iter: usize,
    pub steps: usize,
    pub stop_reason: String,
    pub certified_error: f64,
    pub final_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

impl TraceSummary {
    pub fn from_trace(t: &IterationTrace<f64>, max_iter: usize, csv: Option<String>) -> Self {
        let eps = match t.rule {
            StopRule::AprioriGeo(e) | StopRule::AprioriGauge(e) | StopRule::Residual(e) => Some(e),
            StopRule::FixedCount(_) => None,
        };
        TraceSummary {
            rule: t.rule.name().to_string(),
            eps,
            max_iter,
            steps: t.steps,
            stop_reason: match t.stop_reason {
                StopReason::RuleSatisfied => "rule_satisfied",
                StopReason::MaxIterExhausted => "max_iter_exhausted",
            }
            .to_string(),
            certified_error: t.certified_error,
            final_residual: t.rows.last().map_or(0.0, |r| r.residual),
            csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InexactBlock {
    pub noise_source: String,
    /// Largest per-step noise `η_n` over the run.
    pub eta_bar: f64,
    /// `η̄ / (1 − κ)`.
    pub error_floor: f64,
    pub steps: usize,
    /// Number of final iterates over which the steady error is taken.
    pub steady_window: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_steady_error: Option<f64>,
    /// Certified accuracy of the reference fixed point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityBlock {
    pub eps_estimate: f64,
    pub eps_estimate_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_analytic: Option<f64>,
    pub eps_source: String,
    pub kappa: f64,
    pub stab_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_gap: Option<f64>,
    pub grid_slack: f64,
    pub bound_holds: bool,
    pub shared_radius: f64,
    pub samples: usize,
}

impl StabilityBlock {
    pub fn from_report(r: &PerturbationReport<f64>, shared_radius: f64, samples: usize) -> Self {
        StabilityBlock {
            eps_estimate: r.eps_estimate,
            eps_estimate_label: EPS_ESTIMATE_LABEL.to_string(),
            eps_analytic: r.eps_analytic,
            eps_source: r.eps_source.name().to_string(),
            kappa: r.kappa,
            stab_bound: r.stab_bound,
            observed_gap: r.observed_gap,
            grid_slack: r.grid_slack,
            bound_holds: r.bound_holds,
            shared_radius,
            samples,
        }
    }
}

#[derive(Debug, Serialize)]
struct CsvRow {
    n: usize,
    r_n: f64,
    phi_geo: f64,
    phi_gauge: f64,
    residual_bound: f64,
    eta_n: f64,
}

/// Writes one row per trace step with columns
/// `n, r_n, phi_geo, phi_gauge, residual_bound, eta_n`.
pub fn write_trace_csv<W: Write>(trace: &IterationTrace<f64>, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in &trace.rows {
        w.serialize(CsvRow {
            n: row.n,
            r_n: row.residual,
            phi_geo: row.phi_geo,
            phi_gauge: row.phi_gauge,
            residual_bound: row.residual_bound,
            eta_n: row.eta,
        })?;
    }
    w.flush()?;
    Ok(())
}
