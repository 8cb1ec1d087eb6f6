//! Dependence of fixed points on the map: sampled and model-level estimates
//! of `ε_C(T,S) = sup_{x∈C} d(Tx, Sx)`, the `ε/(1−κ)` bound, and the scalar
//! pair on which that bound is attained.

use crate::engine::{picard_run, StopRule};
use crate::error::{domain, Error, Result};
use crate::funcspace::{sample_ball, sup_distance, BallRegion, GridFunction};
use crate::operators::{build_packet, DataPacket, FixedPointOperator, OperatorKind};
use crate::scalar::Scalar;

/// Certificate target for the fixed-point solves in [`two_sided_stability`].
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Relative accuracy of the scalar solves in [`sharpness_demo`].
pub const SHARPNESS_TOLERANCE: f64 = 1e-13;

const SOLVE_MAX_ITER: usize = 1_000_000;

const ROUNDOFF_UNITS: f64 = 16.0;

/// Which quantity fed `stab_bound`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsilonSource {
    /// Model-level upper bound on `ε_C(T,S)`.
    Analytic,
    /// Sampled lower estimate; the resulting bound is not certified.
    SampledEstimate,
}

impl EpsilonSource {
    pub fn name(self) -> &'static str {
        match self {
            EpsilonSource::Analytic => "analytic",
            EpsilonSource::SampledEstimate => "sampled_estimate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport<S> {
    /// Sampled lower estimate of `ε_C(T,S)`.
    pub eps_estimate: S,
    /// Model-level upper bound on `ε_C(T,S)`, when the pair admits one.
    pub eps_analytic: Option<S>,
    pub eps_source: EpsilonSource,
    pub kappa: S,
    /// `ε/(1−κ)` with `ε` taken from `eps_source`.
    pub stab_bound: S,
    /// `d(x*, y*)` between the computed fixed points.
    pub observed_gap: Option<S>,
    /// Sum of the certified errors of the two computed fixed points plus a
    /// few units of roundoff at their scale.
    pub grid_slack: S,
    pub bound_holds: bool,
}

/// `max` of `d(Tx, Sx)` over [`sample_ball`] draws. A sampled sup only
/// bounds `ε_C(T,S)` from below.
pub fn epsilon_sup<S: Scalar>(
    t: &FixedPointOperator<S>,
    s: &FixedPointOperator<S>,
    region: &BallRegion<S>,
    samples: usize,
    seed: u64,
) -> Result<S> {
    t.grid().check_same(s.grid())?;
    t.grid().check_same(region.grid())?;
    if samples == 0 {
        return Err(domain("epsilon_sup needs at least one sample"));
    }
    let mut eps = S::zero();
    for x in sample_ball(region, samples, seed) {
        eps = eps.max(sup_distance(&t.apply(&x)?, &s.apply(&x)?)?);
    }
    Ok(eps)
}

/// `eps / (1 − κ)`.
pub fn stability_bound<S: Scalar>(kappa: S, eps: S) -> Result<S> {
    if !(kappa >= S::zero() && kappa < S::one()) {
        return Err(domain(format!("modulus {kappa} outside [0, 1)")));
    }
    if !(eps >= S::zero()) {
        return Err(domain(format!(
            "perturbation size {eps} must be nonnegative"
        )));
    }
    Ok(eps / (S::one() - kappa))
}

/// `dg + dK·(Mf0 + Lf·R)`.
pub fn hammerstein_perturbation_bound<S: Scalar>(dg: S, dk: S, mf0: S, lf: S, radius: S) -> S {
    dg + dk * (mf0 + lf * radius)
}

/// `dl + dG·(MF0 + LF·R)`.
pub fn bvp_perturbation_bound<S: Scalar>(dl: S, dg: S, mf0: S, lf: S, radius: S) -> S {
    dl + dg * (mf0 + lf * radius)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpnessDemo<S> {
    pub x_star: S,
    pub y_star: S,
    pub gap: S,
    pub bound: S,
}

/// Solves `T x = κx` and `S x = κx + ε` on the real line and compares the
/// gap between their fixed points with `ε/(1−κ)`.
pub fn sharpness_demo<S: Scalar>(kappa: S, eps: S) -> Result<SharpnessDemo<S>> {
    let bound = stability_bound(kappa, eps)?;
    let solve = |offset: S| -> Result<S> {
        let op = FixedPointOperator::affine_scalar(kappa, offset)?;
        let packet = build_packet(&op, &GridFunction::zero(*op.grid()))?;
        let tol = S::lit(SHARPNESS_TOLERANCE) * S::one().max(bound);
        let trace = picard_run(&packet, StopRule::Residual(tol), SOLVE_MAX_ITER)?;
        if !trace.complete {
            return Err(domain("scalar Picard solve did not reach its tolerance"));
        }
        Ok(trace.iterate.values()[0])
    };
    let x_star = solve(S::zero())?;
    let y_star = solve(eps)?;
    Ok(SharpnessDemo {
        x_star,
        y_star,
        gap: (x_star - y_star).abs(),
        bound,
    })
}

/// Model-level bound on `ε_C(T,S)` for two operators of the same form that
/// share their nonlinearity, over the ball of radius `radius` about 0.
pub fn analytic_epsilon<S: Scalar>(
    t: &FixedPointOperator<S>,
    s: &FixedPointOperator<S>,
    radius: S,
) -> Result<Option<S>> {
    t.grid().check_same(s.grid())?;
    if t.kind() != s.kind() {
        return Ok(None);
    }
    if let (Some((a, b)), Some((a2, b2))) = (t.affine_coefficients(), s.affine_coefficients()) {
        return Ok(Some((a - a2).abs() * radius + (b - b2).abs()));
    }
    let (Some(mt), Some(ms)) = (t.model(), s.model()) else {
        return Ok(None);
    };
    if mt.nonlinearity != ms.nonlinearity {
        return Ok(None);
    }
    let (Some(kt), Some(ks)) = (t.discrete_kernel(), s.discrete_kernel()) else {
        return Ok(None);
    };
    let grid = *t.grid();
    let dk = kt.difference(ks)?;
    let dk = match t.kind() {
        OperatorKind::Volterra => dk.bound_prefix(&grid),
        _ => dk.bound_full(&grid),
    };
    let dg = sup_distance(&t.forcing(), &s.forcing())?;
    let f = &mt.nonlinearity;
    Ok(Some(match t.kind() {
        OperatorKind::Green => bvp_perturbation_bound(dg, dk, f.zero_bound(), f.lip(), radius),
        _ => hammerstein_perturbation_bound(dg, dk, f.zero_bound(), f.lip(), radius),
    }))
}

fn same_region<S: Scalar>(a: &BallRegion<S>, b: &BallRegion<S>) -> Result<bool> {
    let centers = sup_distance(a.center(), b.center())?;
    let scale = S::one().max(a.radius()).max(b.radius());
    Ok(centers == S::zero() && (a.radius() - b.radius()).abs() <= S::lit(1e-12) * scale)
}

/// Solves both fixed points, estimates `ε_C(T,S)` on the shared region and
/// checks `d(x*, y*) ≤ ε/(1 − max(κ_T, κ_S))`.
pub fn two_sided_stability<S: Scalar>(
    packet_t: &DataPacket<S>,
    packet_s: &DataPacket<S>,
    samples: usize,
    seed: u64,
) -> Result<PerturbationReport<S>> {
    let (t, s) = (packet_t.operator(), packet_s.operator());
    t.grid().check_same(s.grid())?;
    let region = packet_t.region();
    if !same_region(region, packet_s.region())? {
        return Err(Error::RegionMismatch(format!(
            "balls of radius {} and {} differ",
            region.radius(),
            packet_s.region().radius()
        )));
    }
    let solve = |p: &DataPacket<S>| -> Result<(GridFunction<S>, S)> {
        let trace = picard_run(
            p,
            StopRule::Residual(S::lit(SOLVE_TOLERANCE)),
            SOLVE_MAX_ITER,
        )?;
        if !trace.complete {
            return Err(domain("fixed-point solve did not reach its tolerance"));
        }
        Ok((trace.iterate, trace.certified_error))
    };
    let (x_star, err_t) = solve(packet_t)?;
    let (y_star, err_s) = solve(packet_s)?;

    let eps_estimate = epsilon_sup(t, s, region, samples, seed)?;
    let eps_analytic = analytic_epsilon(t, s, region.radius())?;
    let (eps, eps_source) = match eps_analytic {
        Some(e) => (e, EpsilonSource::Analytic),
        None => (eps_estimate, EpsilonSource::SampledEstimate),
    };
    let kappa = packet_t.kappa().max(packet_s.kappa());
    let stab_bound = stability_bound(kappa, eps)?;
    let observed_gap = sup_distance(&x_star, &y_star)?;
    let scale = S::one().max(x_star.sup_norm()).max(y_star.sup_norm());
    let grid_slack = err_t + err_s + S::lit(ROUNDOFF_UNITS) * S::epsilon() * scale;
    Ok(PerturbationReport {
        eps_estimate,
        eps_analytic,
        eps_source,
        kappa,
        stab_bound,
        observed_gap: Some(observed_gap),
        grid_slack,
        bound_holds: observed_gap <= stab_bound + grid_slack,
    })
}
