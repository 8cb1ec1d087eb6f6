//! TOML problem documents and their translation into operators and packets.

use std::fmt;

use certfix::engine::{BudgetShape, NoiseBudget, StopRule};
use certfix::funcspace::{Grid, GridFunction, Interval};
use certfix::operators::{
    Bindings, Expr, FixedPointOperator, Kernel, Nonlinearity, OperatorKind, Profile, Var,
};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// A number, or a constant expression such as `"1/3"` evaluated in `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Constant {
    Number(f64),
    Formula(String),
}

impl Constant {
    pub fn value(&self, field: &str) -> Result<f64, DocumentError> {
        match self {
            Constant::Number(v) => Ok(*v),
            Constant::Formula(src) => Expr::parse(src, &[])
                .and_then(|e| e.eval(&Bindings::t(0.0)))
                .map_err(|e| DocumentError::invalid(field, e.to_string())),
        }
    }
}

impl From<f64> for Constant {
    fn from(v: f64) -> Self {
        Constant::Number(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub schema_version: u32,
    pub interval: IntervalSpec,
    pub grid_size: usize,
    /// Seed for every sampled check; command-line flags override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub operator: OperatorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<StartSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSpec {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindSpec {
    Hammerstein,
    Volterra,
    Green,
    Dirichlet,
    Affine,
}

/// Operator data. Which fields are required depends on `kind`:
///
/// * `hammerstein`, `volterra`, `green`: `forcing`, one of `kernel` or
///   `kernel_terms`, and `nonlinearity`;
/// * `dirichlet`: `alpha`, `beta` and `nonlinearity` (`x'' = F(t, x)`);
/// * `affine`: `slope` and `offset` (`x ↦ slope·x + offset` on the reals).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub kind: KindSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    /// Separable kernel as `[t_factor, s_factor]` pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_terms: Option<Vec<[String; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<NonlinearitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Constant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Constant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<Constant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Constant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySpec {
    /// Formula in `s` and `u`.
    pub expr: String,
    pub lip: Constant,
    pub zero_bound: Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartSpec {
    /// Formula in `t`.
    pub expr: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseSourceSpec {
    Injected,
    Quadrature,
}

/// Noise budget. Injected noise takes exactly one of `eta_bar`, `eta_seq`
/// or the pair `eta0`/`ratio` (`η_n = eta0·ratioⁿ`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub source: NoiseSourceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_seq: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RuleSpec {
    Apriori,
    Gauge,
    Residual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DocumentError {
    /// Malformed TOML or schema violation, located in the source.
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    /// Well-formed document whose content is unusable.
    Invalid { field: String, message: String },
}

impl DocumentError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        DocumentError::Invalid {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for DocumentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocumentError::Syntax {
                line,
                column,
                message,
            } => write!(f, "line {line}, column {column}: {message}"),
            DocumentError::Invalid { field, message } => write!(f, "{field}: {message}"),
        }
    }
}

impl std::error::Error for DocumentError {}

/// 1-based line and column of byte `offset` in `src`.
fn line_column(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl ProblemDocument {
    pub fn parse(src: &str) -> Result<Self, DocumentError> {
        let doc: ProblemDocument = toml::from_str(src).map_err(|e| {
            let (line, column) = e.span().map_or((1, 1), |s| line_column(src, s.start));
            DocumentError::Syntax {
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(DocumentError::invalid(
                "schema_version",
                format!(
                    "unsupported version {} (expected {SCHEMA_VERSION})",
                    doc.schema_version
                ),
            ));
        }
        Ok(doc)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("problem documents always serialize")
    }

    pub fn grid(&self) -> Result<Grid<f64>, DocumentError> {
        if self.operator.kind == KindSpec::Affine {
            return Ok(Grid::scalar());
        }
        let iv = Interval::new(self.interval.a, self.interval.b)
            .map_err(|e| DocumentError::invalid("interval", e.to_string()))?;
        if self.grid_size < 2 {
            return Err(DocumentError::invalid(
                "grid_size",
                "need at least two nodes",
            ));
        }
        Grid::new(iv, self.grid_size)
            .map_err(|e| DocumentError::invalid("grid_size", e.to_string()))
    }

    pub fn operator(&self) -> Result<FixedPointOperator<f64>, DocumentError> {
        let op = &self.operator;
        let grid = self.grid()?;
        match op.kind {
            KindSpec::Affine => {
                let slope = required(&op.slope, "operator.slope")?.value("operator.slope")?;
                let offset = required(&op.offset, "operator.offset")?.value("operator.offset")?;
                FixedPointOperator::affine_scalar(slope, offset).map_err(core_error("operator"))
            }
            KindSpec::Dirichlet => {
                let alpha = required(&op.alpha, "operator.alpha")?.value("operator.alpha")?;
                let beta = required(&op.beta, "operator.beta")?.value("operator.beta")?;
                let f = self.nonlinearity()?;
                FixedPointOperator::dirichlet(grid, alpha, beta, f).map_err(core_error("operator"))
            }
            KindSpec::Hammerstein | KindSpec::Volterra | KindSpec::Green => {
                let forcing = required(&op.forcing, "operator.forcing")?;
                let forcing = Profile::parse(forcing).map_err(core_error("operator.forcing"))?;
                let kernel = self.kernel()?;
                let f = self.nonlinearity()?;
                let build = match op.kind {
                    KindSpec::Hammerstein => FixedPointOperator::hammerstein,
                    KindSpec::Volterra => FixedPointOperator::volterra,
                    _ => FixedPointOperator::green,
                };
                build(grid, forcing, kernel, f).map_err(core_error("operator"))
            }
        }
    }

    fn kernel(&self) -> Result<Kernel<f64>, DocumentError> {
        match (&self.operator.kernel, &self.operator.kernel_terms) {
            (Some(src), None) => Kernel::parse_expression(src)
                .map_err(|e| DocumentError::invalid("operator.kernel", e.to_string())),
            (None, Some(terms)) => {
                let pairs: Vec<(&str, &str)> = terms
                    .iter()
                    .map(|[a, b]| (a.as_str(), b.as_str()))
                    .collect();
                Kernel::separable_from_strings(&pairs)
                    .map_err(|e| DocumentError::invalid("operator.kernel_terms", e.to_string()))
            }
            _ => Err(DocumentError::invalid(
                "operator.kernel",
                "give exactly one of kernel or kernel_terms",
            )),
        }
    }

    fn nonlinearity(&self) -> Result<Nonlinearity<f64>, DocumentError> {
        let spec = required(&self.operator.nonlinearity, "operator.nonlinearity")?;
        let lip = spec.lip.value("operator.nonlinearity.lip")?;
        let zero = spec.zero_bound.value("operator.nonlinearity.zero_bound")?;
        Nonlinearity::parse_expression(&spec.expr, lip, zero)
            .map_err(|e| DocumentError::invalid("operator.nonlinearity", e.to_string()))
    }

    /// Starting point; the zero function unless `x0` is given.
    pub fn start(&self, grid: Grid<f64>) -> Result<GridFunction<f64>, DocumentError> {
        let Some(spec) = &self.x0 else {
            return Ok(GridFunction::zero(grid));
        };
        let profile = Profile::<f64>::parse(&spec.expr)
            .map_err(|e| DocumentError::invalid("x0.expr", e.to_string()))?;
        profile
            .sample(grid)
            .map_err(|e| DocumentError::invalid("x0.expr", e.to_string()))
    }

    pub fn noise_budget(&self, seed: u64) -> Result<Option<NoiseBudget<f64>>, DocumentError> {
        let Some(n) = &self.noise else {
            return Ok(None);
        };
        if n.source == NoiseSourceSpec::Quadrature {
            if n.eta_bar.is_some() || n.eta_seq.is_some() || n.eta0.is_some() || n.ratio.is_some() {
                return Err(DocumentError::invalid(
                    "noise",
                    "quadrature-estimated noise takes no budget values",
                ));
            }
            return Ok(Some(NoiseBudget::quadrature()));
        }
        let shape = match (&n.eta_bar, &n.eta_seq, n.eta0, n.ratio) {
            (Some(e), None, None, None) => BudgetShape::Constant(*e),
            (None, Some(seq), None, None) => BudgetShape::Sequence(seq.clone()),
            (None, None, Some(eta0), Some(ratio)) => BudgetShape::Summable { eta0, ratio },
            _ => {
                return Err(DocumentError::invalid(
                    "noise",
                    "give exactly one of eta_bar, eta_seq, or eta0 with ratio",
                ))
            }
        };
        Ok(Some(NoiseBudget::injected(shape, n.seed.unwrap_or(seed))))
    }

    pub fn stop_rule(&self, rule: Option<RuleSpec>, eps: Option<f64>) -> StopRule<f64> {
        let stop = self.stop.as_ref();
        let rule = rule
            .or(stop.and_then(|s| s.rule))
            .unwrap_or(RuleSpec::Residual);
        let eps = eps.or(stop.and_then(|s| s.eps)).unwrap_or(DEFAULT_EPS);
        match rule {
            RuleSpec::Apriori => StopRule::AprioriGeo(eps),
            RuleSpec::Gauge => StopRule::AprioriGauge(eps),
            RuleSpec::Residual => StopRule::Residual(eps),
        }
    }

    pub fn max_iter(&self, flag: Option<usize>) -> usize {
        flag.or(self.stop.as_ref().and_then(|s| s.max_iter))
            .unwrap_or(DEFAULT_MAX_ITER)
    }

    /// Human-readable notes about expressions that divide by zero somewhere
    /// on the grid.
    pub fn warnings(&self) -> Vec<String> {
        let Ok(grid) = self.grid() else {
            return Vec::new();
        };
        let nodes: Vec<f64> = grid.nodes().collect();
        let op = &self.operator;
        let mut out = Vec::new();
        let mut check = |field: &str, src: &str, allowed: &[Var], points: &[Bindings<f64>]| {
            if let Ok(e) = Expr::parse(src, allowed) {
                if e.has_vanishing_divisor(points) {
                    out.push(format!("{field}: divisor vanishes on the grid in '{src}'"));
                }
            }
        };
        let line: Vec<_> = nodes.iter().map(|&t| Bindings::ts(t, t)).collect();
        let plane: Vec<_> = nodes
            .iter()
            .flat_map(|&t| nodes.iter().map(move |&s| Bindings::ts(t, s)))
            .collect();
        if let Some(src) = &op.forcing {
            check("operator.forcing", src, &[Var::T, Var::S], &line);
        }
        if let Some(src) = &self.x0.as_ref().map(|x| x.expr.clone()) {
            check("x0.expr", src, &[Var::T, Var::S], &line);
        }
        if let Some(src) = &op.kernel {
            check("operator.kernel", src, &[Var::T, Var::S], &plane);
        }
        for [a, b] in op.kernel_terms.iter().flatten() {
            check("operator.kernel_terms", a, &[Var::T, Var::S], &line);
            check("operator.kernel_terms", b, &[Var::T, Var::S], &line);
        }
        if let Some(f) = &op.nonlinearity {
            // u = 0 on every node: the zero-level evaluation always happens
            let zero: Vec<_> = nodes.iter().map(|&s| Bindings::su(s, 0.0)).collect();
            check("operator.nonlinearity", &f.expr, &[Var::S, Var::U], &zero);
        }
        out
    }
}

pub const DEFAULT_EPS: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 10_000;

fn core_error(field: &'static str) -> impl Fn(certfix::Error) -> DocumentError {
    move |e| DocumentError::invalid(field, e.to_string())
}

fn required<'a, T>(v: &'a Option<T>, field: &str) -> Result<&'a T, DocumentError> {
    v.as_ref()
        .ok_or_else(|| DocumentError::invalid(field, "required for this operator kind"))
}

impl KindSpec {
    pub fn operator_kind(self) -> OperatorKind {
        match self {
            KindSpec::Hammerstein => OperatorKind::Hammerstein,
            KindSpec::Volterra => OperatorKind::Volterra,
            KindSpec::Green | KindSpec::Dirichlet => OperatorKind::Green,
            KindSpec::Affine => OperatorKind::AffineScalar,
        }
    }
}
