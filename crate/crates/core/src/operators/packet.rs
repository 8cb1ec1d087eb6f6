//! Admissible data packets and the six-item diagnostic checklist.
//!
//! Items are evaluated in dependency order (C1, C4 pre-check on `L`, C3, C2,
//! C4, C5, C6): the invariant radius cannot be formed before `L < 1` is known,
//! so a modulus failure is reported before any region check.

use std::fmt;

use crate::error::{domain, Error, Result};
use crate::funcspace::{sample_ball, BallRegion, GridFunction};
use crate::gauge::{CertifiedModulus, Gauge};
use crate::operators::diagnostics::{gauge_dominance_check, ControlMode};
use crate::operators::{FixedPointOperator, OperatorKind};
use crate::scalar::Scalar;

/// Relative tolerance for numerically verified invariance.
pub const INVARIANCE_TOLERANCE: f64 = 1e-9;
/// Lipschitz bounds this close to one are indistinguishable from one after
/// quadrature and rounding, so they are not accepted as contractions.
pub const CONTRACTION_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChecklistItem {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
}

impl ChecklistItem {
    pub const ALL: [ChecklistItem; 6] = [
        ChecklistItem::C1,
        ChecklistItem::C2,
        ChecklistItem::C3,
        ChecklistItem::C4,
        ChecklistItem::C5,
        ChecklistItem::C6,
    ];

    pub fn topic(self) -> &'static str {
        match self {
            ChecklistItem::C1 => "space",
            ChecklistItem::C2 => "region",
            ChecklistItem::C3 => "gauge",
            ChecklistItem::C4 => "local modulus",
            ChecklistItem::C5 => "perturbations",
            ChecklistItem::C6 => "initialization",
        }
    }
}

impl fmt::Display for ChecklistItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChecklistEntry<S> {
    pub item: ChecklistItem,
    pub verdict: Verdict,
    pub detail: String,
    pub evidence: Vec<(&'static str, S)>,
}

/// First failed checklist item with the offending value.
#[derive(Debug, Clone, PartialEq)]
pub struct ChecklistFailure {
    pub item: ChecklistItem,
    pub message: String,
    pub value: f64,
}

impl fmt::Display for ChecklistFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.item, self.message)
    }
}

/// Verifiable constants of a packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketConstants<S> {
    /// `L_f` (declared, lattice-verified).
    pub lip_f: S,
    /// `M`: kernel bound of the operator form.
    pub kernel_bound: S,
    /// `L = L_f·M`, which is also `κ`.
    pub lipschitz: S,
    /// `‖g‖∞` (or `‖ℓ‖∞`, `|ε|`).
    pub forcing_norm: S,
    /// `M_{f0}`.
    pub zero_bound: S,
    /// Working radius of `C = B(0, R)`.
    pub radius: S,
    /// `d(T x0, x0)`.
    pub delta0: S,
}

#[derive(Debug, Clone)]
pub struct DataPacket<S: Scalar> {
    operator: FixedPointOperator<S>,
    x0: GridFunction<S>,
    region: BallRegion<S>,
    gauge: Gauge<S>,
    modulus: CertifiedModulus<S>,
    delta0: S,
    constants: PacketConstants<S>,
    checklist: Vec<ChecklistEntry<S>>,
}

impl<S: Scalar> DataPacket<S> {
    pub fn operator(&self) -> &FixedPointOperator<S> {
        &self.operator
    }

    pub fn x0(&self) -> &GridFunction<S> {
        &self.x0
    }

    pub fn region(&self) -> &BallRegion<S> {
        &self.region
    }

    pub fn gauge(&self) -> &Gauge<S> {
        &self.gauge
    }

    pub fn modulus(&self) -> &CertifiedModulus<S> {
        &self.modulus
    }

    pub fn kappa(&self) -> S {
        self.modulus.kappa()
    }

    pub fn delta0(&self) -> S {
        self.delta0
    }

    pub fn constants(&self) -> &PacketConstants<S> {
        &self.constants
    }

    pub fn checklist(&self) -> &[ChecklistEntry<S>] {
        &self.checklist
    }

    /// Same operator and region with another starting point; `x0` must lie
    /// in the certified ball.
    pub fn with_start(&self, x0: GridFunction<S>) -> Result<Self> {
        if !self
            .region
            .contains(&x0, S::tolerance(INVARIANCE_TOLERANCE))?
        {
            return Err(domain("starting point outside the certified region"));
        }
        let delta0 = crate::funcspace::sup_distance(&self.operator.apply(&x0)?, &x0)?;
        let mut next = self.clone();
        next.x0 = x0;
        next.delta0 = delta0;
        next.constants.delta0 = delta0;
        Ok(next)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketOptions<S> {
    /// Samples drawn from the ball for the numeric C2/C3 checks.
    pub samples: usize,
    pub seed: u64,
    /// Working radius to use instead of the analytic one; must still pass
    /// the invariance checks.
    pub radius: Option<S>,
}

impl<S: Scalar> Default for PacketOptions<S> {
    fn default() -> Self {
        PacketOptions {
            samples: 24,
            seed: 0,
            radius: None,
        }
    }
}

/// `(‖g‖∞ + M·M_{f0}) / (1 − L)`.
pub fn invariant_radius<S: Scalar>(
    forcing_norm: S,
    kernel_bound: S,
    zero_bound: S,
    lipschitz: S,
) -> Result<S> {
    if !(lipschitz < S::one()) {
        return Err(domain(format!(
            "Lipschitz bound {lipschitz} is not below 1"
        )));
    }
    if forcing_norm < S::zero() || kernel_bound < S::zero() || zero_bound < S::zero() {
        return Err(domain("invariant radius inputs must be nonnegative"));
    }
    Ok((forcing_norm + kernel_bound * zero_bound) / (S::one() - lipschitz))
}

pub fn build_packet<S: Scalar>(
    operator: &FixedPointOperator<S>,
    x0: &GridFunction<S>,
) -> Result<DataPacket<S>> {
    build_packet_with(operator, x0, &PacketOptions::default())
}

struct Checklist<S> {
    entries: Vec<ChecklistEntry<S>>,
}

impl<S: Scalar> Checklist<S> {
    fn pass(&mut self, item: ChecklistItem, detail: String, evidence: Vec<(&'static str, S)>) {
        self.entries.push(ChecklistEntry {
            item,
            verdict: Verdict::Pass,
            detail,
            evidence,
        });
    }

    fn fail(item: ChecklistItem, message: String, value: S) -> Error {
        Error::Checklist(ChecklistFailure {
            item,
            message,
            value: value.to_f64_lossy(),
        })
    }
}

pub fn build_packet_with<S: Scalar>(
    operator: &FixedPointOperator<S>,
    x0: &GridFunction<S>,
    options: &PacketOptions<S>,
) -> Result<DataPacket<S>> {
    let grid = *operator.grid();
    grid.check_same(x0.grid())?;
    let tol = S::tolerance(INVARIANCE_TOLERANCE);
    let mut list = Checklist {
        entries: Vec::new(),
    };

    // C1: the sup-norm space on the grid is complete; data must be finite.
    if !x0.is_finite() {
        return Err(Checklist::fail(
            ChecklistItem::C1,
            "x0 has non-finite values".into(),
            S::nan(),
        ));
    }
    let forcing = operator.forcing();
    list.pass(
        ChecklistItem::C1,
        format!("sup-norm space on {} nodes", grid.size()),
        vec![("grid_size", S::count(grid.size()))],
    );

    let lip_f = operator.nonlinearity_lip();
    let kernel_bound = operator.kernel_bound();
    let lipschitz = lip_f * kernel_bound;
    if !(lipschitz < S::one() - S::tolerance(CONTRACTION_MARGIN)) {
        let detail = if lipschitz >= S::one() {
            format!("κ={lipschitz} ≥ 1")
        } else {
            format!("κ={lipschitz} is within rounding of 1")
        };
        return Err(Checklist::fail(ChecklistItem::C4, detail, lipschitz));
    }
    let forcing_norm = forcing.sup_norm();
    let zero_bound = operator.zero_bound();
    let analytic_radius = invariant_radius(forcing_norm, kernel_bound, zero_bound, lipschitz)?;
    let mut radius = options.radius.unwrap_or(analytic_radius);
    if operator.kind() == OperatorKind::AffineScalar {
        radius = radius.max(x0.sup_norm());
    }
    if radius == S::zero() {
        radius = S::one();
    }
    let region = BallRegion::new(GridFunction::zero(grid), radius)?;

    // C3: two-point geometric gauge ω(r) = L r, from lattice-verified L_f.
    let gauge = Gauge::geometric(lipschitz)?;
    let mut c3_evidence = vec![("lip_f", lip_f), ("kernel_bound", kernel_bound)];
    if let Some(model) = operator.model() {
        let ev = model
            .nonlinearity
            .verify_declared(&grid.interval(), radius)
            .map_err(|e| Checklist::fail(ChecklistItem::C3, e.to_string(), lip_f))?;
        c3_evidence.push(("sampled_lip_f", ev.max_quotient));
        c3_evidence.push(("sampled_zero_level", ev.max_zero_level));
    }
    let dominance = gauge_dominance_check(
        operator,
        &gauge,
        &region,
        ControlMode::TwoPoint,
        options.samples.max(2),
        options.seed,
    )?;
    c3_evidence.push(("max_sampled_gauge_ratio", dominance.max_ratio));
    if !dominance.consistent {
        return Err(Checklist::fail(
            ChecklistItem::C3,
            format!("sampled d(Tx,Ty)/ω(d(x,y)) = {} > 1", dominance.max_ratio),
            dominance.max_ratio,
        ));
    }
    list.pass(
        ChecklistItem::C3,
        format!("geometric gauge ω(r) = {lipschitz}·r"),
        c3_evidence,
    );

    // C2: x0 ∈ C and T(C) ⊆ C, analytically and on boundary samples.
    let x0_norm = x0.sup_norm();
    if x0_norm > radius * (S::one() + tol) {
        return Err(Checklist::fail(
            ChecklistItem::C2,
            format!("x0 outside C: ‖x0‖∞={x0_norm} > R={radius}"),
            x0_norm,
        ));
    }
    let analytic_image = forcing_norm + kernel_bound * (zero_bound + lip_f * radius);
    if analytic_image > radius * (S::one() + tol) {
        return Err(Checklist::fail(
            ChecklistItem::C2,
            format!("analytic image bound {analytic_image} > R={radius}"),
            analytic_image,
        ));
    }
    let mut worst_image = S::zero();
    for x in sample_ball(&region, options.samples.max(5), options.seed) {
        worst_image = worst_image.max(operator.apply(&x)?.sup_norm());
    }
    if worst_image > radius * (S::one() + tol) {
        return Err(Checklist::fail(
            ChecklistItem::C2,
            format!("sampled ‖Tx‖∞={worst_image} > R={radius}"),
            worst_image,
        ));
    }
    list.pass(
        ChecklistItem::C2,
        format!("C = B(0, {radius}) is invariant"),
        vec![
            ("radius", radius),
            ("analytic_radius", analytic_radius),
            ("analytic_image_bound", analytic_image),
            ("max_sampled_image_norm", worst_image),
            ("x0_norm", x0_norm),
        ],
    );

    // C4: κ certified on the diameter 2R of C.
    let modulus = gauge
        .certify_modulus(S::lit(2.0) * radius)
        .map_err(|e| Checklist::fail(ChecklistItem::C4, e.to_string(), lipschitz))?;
    list.pass(
        ChecklistItem::C4,
        format!("κ={} < 1 on radius {}", modulus.kappa(), modulus.radius()),
        vec![
            ("kappa", modulus.kappa()),
            ("modulus_radius", modulus.radius()),
        ],
    );

    list.entries.push(ChecklistEntry {
        item: ChecklistItem::C5,
        verdict: Verdict::NotApplicable,
        detail: "no perturbed map supplied".into(),
        evidence: Vec::new(),
    });

    // C6: initial defect.
    let delta0 = crate::funcspace::sup_distance(&operator.apply(x0)?, x0)?;
    list.pass(
        ChecklistItem::C6,
        format!("δ0 = {delta0}"),
        vec![("delta0", delta0)],
    );
    list.entries.sort_by_key(|e| e.item);

    Ok(DataPacket {
        operator: operator.clone(),
        x0: x0.clone(),
        region,
        gauge,
        modulus,
        delta0,
        constants: PacketConstants {
            lip_f,
            kernel_bound,
            lipschitz,
            forcing_norm,
            zero_bound,
            radius,
            delta0,
        },
        checklist: list.entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{Grid, Interval};
    use crate::gauge::ModulusMethod;
    use crate::operators::{Kernel, Nonlinearity, Profile};

    fn worked(lambda: f64) -> FixedPointOperator<f64> {
        FixedPointOperator::hammerstein(
            Grid::new(Interval::unit(), 401).unwrap(),
            Profile::parse("t").unwrap(),
            Kernel::separable_from_strings(&[("t", "1"), ("1", "s")]).unwrap(),
            Nonlinearity::linear(lambda),
        )
        .unwrap()
    }

    #[test]
    fn radius_examples() {
        assert_eq!(invariant_radius(1.0, 1.5, 0.0, 0.5).unwrap(), 2.0);
        assert_eq!(invariant_radius(0.0, 1.5, 0.0, 0.5).unwrap(), 0.0);
        let r = invariant_radius(1.0, 0.125, 0.0, 0.125).unwrap();
        assert!((r - 8.0f64 / 7.0).abs() < 1e-15);
        assert!(invariant_radius(1.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn worked_packet() {
        let op = worked(1.0 / 3.0);
        let p = build_packet(&op, &GridFunction::zero(*op.grid())).unwrap();
        assert!((p.kappa() - 0.5).abs() < 1e-15);
        assert_eq!(p.modulus().method(), ModulusMethod::Analytic);
        assert!((p.region().radius() - 2.0).abs() < 1e-12);
        assert!((p.delta0() - 1.0).abs() < 1e-15);
        assert_eq!(p.checklist().len(), 6);
        assert!(p.checklist().iter().all(|e| e.verdict != Verdict::Fail));
    }

    #[test]
    fn expansive_packet_fails_c4() {
        let op = worked(1.0);
        match build_packet(&op, &GridFunction::zero(*op.grid())) {
            Err(Error::Checklist(f)) => {
                assert_eq!(f.item, ChecklistItem::C4);
                assert!(f.to_string().starts_with("C4: κ=1.5"), "{f}");
            }
            other => panic!("expected C4 failure, got {other:?}"),
        }
    }

    #[test]
    fn unit_lipschitz_bound_fails_c4_despite_rounding() {
        let op = FixedPointOperator::hammerstein(
            Grid::new(Interval::unit(), 401).unwrap(),
            Profile::parse("t").unwrap(),
            Kernel::parse_expression("1").unwrap(),
            Nonlinearity::linear(1.0),
        )
        .unwrap();
        // the trapezoid sum of the constant kernel lands just below one
        assert!(op.lipschitz_bound() <= 1.0);
        match build_packet(&op, &GridFunction::zero(*op.grid())) {
            Err(Error::Checklist(f)) => assert_eq!(f.item, ChecklistItem::C4),
            other => panic!("expected C4 failure, got {other:?}"),
        }
    }

    #[test]
    fn affine_scalar_packet() {
        let op = FixedPointOperator::affine_scalar(0.5, 0.0).unwrap();
        let x0 = GridFunction::constant(Grid::scalar(), 1.0);
        let p = build_packet(&op, &x0).unwrap();
        assert_eq!(p.delta0(), 0.5);
        assert_eq!(p.region().radius(), 1.0);
        assert_eq!(p.kappa(), 0.5);
    }

    #[test]
    fn nonexpansive_affine_fails_c4() {
        let op = FixedPointOperator::affine_scalar(1.0, 0.0).unwrap();
        let err = build_packet(&op, &GridFunction::constant(Grid::scalar(), 1.0)).unwrap_err();
        assert!(matches!(
            err,
            Error::Checklist(ChecklistFailure {
                item: ChecklistItem::C4,
                ..
            })
        ));
    }

    #[test]
    fn start_outside_ball_fails_c2() {
        let op = worked(1.0 / 3.0);
        let x0 = GridFunction::constant(*op.grid(), 3.0);
        let err = build_packet(&op, &x0).unwrap_err();
        assert!(matches!(
            err,
            Error::Checklist(ChecklistFailure {
                item: ChecklistItem::C2,
                ..
            })
        ));
    }

    #[test]
    fn understated_lipschitz_fails_c3() {
        let op = FixedPointOperator::hammerstein(
            Grid::new(Interval::unit(), 101).unwrap(),
            Profile::parse("t").unwrap(),
            Kernel::separable_from_strings(&[("t", "1"), ("1", "s")]).unwrap(),
            Nonlinearity::parse_expression("u/2", 1.0 / 3.0, 0.0).unwrap(),
        )
        .unwrap();
        let err = build_packet(&op, &GridFunction::zero(*op.grid())).unwrap_err();
        assert!(matches!(
            err,
            Error::Checklist(ChecklistFailure {
                item: ChecklistItem::C3,
                ..
            })
        ));
    }

    #[test]
    fn degenerate_radius_inflated() {
        let op = FixedPointOperator::hammerstein(
            Grid::new(Interval::unit(), 21).unwrap(),
            Profile::parse("0").unwrap(),
            Kernel::parse_expression("1").unwrap(),
            Nonlinearity::linear(0.5),
        )
        .unwrap();
        let p = build_packet(&op, &GridFunction::zero(*op.grid())).unwrap();
        assert_eq!(p.region().radius(), 1.0);
        assert_eq!(p.delta0(), 0.0);
    }

    #[test]
    fn undersized_radius_rejected() {
        let op = worked(1.0 / 3.0);
        let opts = PacketOptions {
            radius: Some(1.5),
            ..PacketOptions::default()
        };
        let err = build_packet_with(&op, &GridFunction::zero(*op.grid()), &opts).unwrap_err();
        assert!(matches!(
            err,
            Error::Checklist(ChecklistFailure {
                item: ChecklistItem::C2,
                ..
            })
        ));
    }
}
