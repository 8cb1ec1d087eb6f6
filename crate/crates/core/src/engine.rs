//! Picard iteration, exact and inexact, with certified error bounds recorded
//! at every step.
//!
//! Row `n` of a trace describes the iterate `x_n`: its residual
//! `r_n = d(x_n, x_{n+1})`, the a priori bounds `Φ_geo(n)` and `Φ_ω(n)`, the
//! residual certificate `r_n / (1 − κ)` and the noise `η_n` spent producing
//! `x_{n+1}`. For inexact orbits the a priori column carries
//! `κⁿ·δ0/(1−κ) + Σ_{j<n} κ^{n−1−j} η_j` and the residual certificate uses
//! `r̃_n + η_n`; both reduce to the exact-orbit values when no noise is
//! injected.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Result};
use crate::funcspace::{random_profile, sup_distance, GridFunction};
use crate::gauge::{n_geo, phi_geo};
use crate::operators::DataPacket;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule<S> {
    /// Stop after `N_geo(ε)` steps.
    AprioriGeo(S),
    /// Stop after `N_ω(ε)` steps.
    AprioriGauge(S),
    /// Stop at the first `n` with `r_n ≤ (1 − κ)·ε`.
    Residual(S),
    FixedCount(usize),
}

impl<S: Scalar> StopRule<S> {
    fn validate(&self) -> Result<()> {
        match *self {
            StopRule::AprioriGeo(e) | StopRule::AprioriGauge(e) | StopRule::Residual(e) => {
                if !(e > S::zero()) {
                    return Err(domain(format!("stopping tolerance {e} must be positive")));
                }
                Ok(())
            }
            StopRule::FixedCount(_) => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StopRule::AprioriGeo(_) => "apriori",
            StopRule::AprioriGauge(_) => "gauge",
            StopRule::Residual(_) => "residual",
            StopRule::FixedCount(_) => "fixed-count",
        }
    }
}

/// Per-step error sizes `η_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum BudgetShape<S> {
    None,
    Constant(S),
    /// Explicit values; steps past the end carry no error.
    Sequence(Vec<S>),
    /// `η0·ρⁿ`.
    Summable {
        eta0: S,
        ratio: S,
    },
}

impl<S: Scalar> BudgetShape<S> {
    pub fn eta(&self, n: usize) -> S {
        match self {
            BudgetShape::None => S::zero(),
            BudgetShape::Constant(e) => *e,
            BudgetShape::Sequence(v) => v.get(n).copied().unwrap_or_else(S::zero),
            BudgetShape::Summable { eta0, ratio } => *eta0 * crate::gauge::pow_count(*ratio, n),
        }
    }

    /// `sup_n η_n`.
    pub fn sup(&self) -> S {
        match self {
            BudgetShape::None => S::zero(),
            BudgetShape::Constant(e) => *e,
            BudgetShape::Sequence(v) => v.iter().fold(S::zero(), |m, &e| m.max(e)),
            BudgetShape::Summable { eta0, .. } => *eta0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            BudgetShape::None => true,
            BudgetShape::Constant(e) => *e >= S::zero(),
            BudgetShape::Sequence(v) => v.iter().all(|e| *e >= S::zero()),
            BudgetShape::Summable { eta0, ratio } => {
                *eta0 >= S::zero() && *ratio >= S::zero() && *ratio < S::one()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(domain(
                "noise budget entries must be nonnegative (and ρ < 1)",
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseSource {
    /// Perturbations of norm exactly `η_n`, drawn from the seed.
    Injected { seed: u64 },
    /// `η_n` is the quadrature defect of `T` at the current iterate.
    QuadratureEstimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBudget<S> {
    pub shape: BudgetShape<S>,
    pub source: NoiseSource,
}

impl<S: Scalar> NoiseBudget<S> {
    pub fn injected(shape: BudgetShape<S>, seed: u64) -> Self {
        NoiseBudget {
            shape,
            source: NoiseSource::Injected { seed },
        }
    }

    pub fn quadrature() -> Self {
        NoiseBudget {
            shape: BudgetShape::None,
            source: NoiseSource::QuadratureEstimated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow<S> {
    pub n: usize,
    pub residual: S,
    pub phi_geo: S,
    pub phi_gauge: S,
    pub residual_bound: S,
    pub eta: S,
    /// `κ·r_{n−1} + η_n + η_{n−1}` for `n ≥ 1`.
    pub recursion_bound: Option<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    RuleSatisfied,
    MaxIterExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace<S> {
    pub rows: Vec<TraceRow<S>>,
    /// `x_0, …, x_steps`.
    pub iterates: Vec<GridFunction<S>>,
    pub iterate: GridFunction<S>,
    /// Smallest valid certificate for `iterate`.
    pub certified_error: S,
    pub stop_reason: StopReason,
    pub rule: StopRule<S>,
    pub steps: usize,
    pub complete: bool,
    pub kappa: S,
    pub delta0: S,
}

/// `r / (1 − κ)`.
pub fn residual_to_error<S: Scalar>(r: S, kappa: S) -> Result<S> {
    check_kappa(kappa)?;
    Ok(r / (S::one() - kappa))
}

/// `η̄ / (1 − κ)`.
pub fn error_floor<S: Scalar>(kappa: S, eta_bar: S) -> Result<S> {
    check_kappa(kappa)?;
    Ok(eta_bar / (S::one() - kappa))
}

/// `κⁿ·d0 + Σ_{j=0}^{n−1} κ^{n−1−j}·η_j`.
pub fn inexact_apriori_bound<S: Scalar>(
    n: usize,
    kappa: S,
    d0: S,
    budget: &BudgetShape<S>,
) -> Result<S> {
    check_kappa(kappa)?;
    let mut acc = d0;
    for j in 0..n {
        acc = kappa * acc + budget.eta(j);
    }
    Ok(acc)
}

fn check_kappa<S: Scalar>(kappa: S) -> Result<()> {
    if !(kappa >= S::zero() && kappa < S::one()) {
        return Err(domain(format!("modulus {kappa} outside [0, 1)")));
    }
    Ok(())
}

/// Exact Picard iteration `x_{n+1} = T x_n` from the packet's `x0`.
pub fn picard_run<S: Scalar>(
    packet: &DataPacket<S>,
    rule: StopRule<S>,
    max_iter: usize,
) -> Result<IterationTrace<S>> {
    run(packet, None, rule, max_iter)
}

/// Inexact Picard orbit with `d(x̃_{n+1}, T x̃_n) ≤ η_n`.
pub fn inexact_run<S: Scalar>(
    packet: &DataPacket<S>,
    budget: &NoiseBudget<S>,
    rule: StopRule<S>,
    max_iter: usize,
) -> Result<IterationTrace<S>> {
    budget.shape.validate()?;
    run(packet, Some(budget), rule, max_iter)
}

fn perturbation<S: Scalar>(
    like: &GridFunction<S>,
    eta: S,
    rng: &mut ChaCha8Rng,
) -> GridFunction<S> {
    let grid = *like.grid();
    let sign = if rng.gen_bool(0.5) {
        S::one()
    } else {
        -S::one()
    };
    let mut profile = random_profile(&grid, rng);
    let norm = profile.iter().fold(S::zero(), |m, v| m.max(v.abs()));
    if norm == S::zero() {
        profile = vec![S::one(); grid.size()];
    } else {
        for v in profile.iter_mut() {
            *v = *v / norm;
        }
    }
    GridFunction::from_raw(grid, profile.into_iter().map(|v| sign * eta * v).collect())
}

fn run<S: Scalar>(
    packet: &DataPacket<S>,
    noise: Option<&NoiseBudget<S>>,
    rule: StopRule<S>,
    max_iter: usize,
) -> Result<IterationTrace<S>> {
    rule.validate()?;
    if max_iter == 0 {
        return Err(domain("max_iter must be at least 1"));
    }
    let op = packet.operator();
    let kappa = packet.kappa();
    let delta0 = packet.delta0();
    let gauge = packet.gauge();
    let modulus = packet.modulus();
    let one_minus = S::one() - kappa;

    let target = match rule {
        StopRule::AprioriGeo(eps) if noise.is_none() => Some(n_geo(eps, kappa, delta0)?),
        StopRule::AprioriGauge(eps) if noise.is_none() => {
            Some(gauge.stopping_index(eps, delta0, modulus)?)
        }
        StopRule::FixedCount(n) => Some(n),
        _ => None,
    };

    let mut rng = match noise.map(|b| b.source) {
        Some(NoiseSource::Injected { seed }) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };

    let mut rows: Vec<TraceRow<S>> = Vec::new();
    let mut iterates = vec![packet.x0().clone()];
    let mut current = packet.x0().clone();
    // inexact a priori accumulator, seeded with d(x0, x*) ≤ δ0/(1−κ)
    let mut apriori = delta0 / one_minus;
    let mut gauge_r = delta0;
    let mut noise_seen = false;
    let mut prev: Option<(S, S)> = None;

    for n in 0.. {
        let image = op.apply(&current)?;
        let (next, eta) = match noise {
            None => (image, S::zero()),
            Some(budget) => match budget.source {
                NoiseSource::Injected { .. } => {
                    let eta = budget.shape.eta(n);
                    let rng = rng.as_mut().expect("seeded for injected noise");
                    (image.add(&perturbation(&image, eta, rng))?, eta)
                }
                NoiseSource::QuadratureEstimated => {
                    let eta = op.quadrature_defect(&current)?;
                    (image, eta)
                }
            },
        };
        let residual = sup_distance(&current, &next)?;
        let exact_geo = phi_geo(n, kappa, delta0)?;
        let phi_geo_col = if noise.is_none() { exact_geo } else { apriori };
        let exact_gauge = if noise_seen || eta > S::zero() {
            phi_geo_col
        } else {
            gauge.tail_from(gauge_r, n, delta0, modulus)
        };
        noise_seen |= eta > S::zero();
        let residual_bound = (residual + eta) / one_minus;
        let recursion_bound = prev.map(|(r_prev, eta_prev)| kappa * r_prev + eta + eta_prev);
        rows.push(TraceRow {
            n,
            residual,
            phi_geo: phi_geo_col,
            phi_gauge: exact_gauge,
            residual_bound,
            eta,
            recursion_bound,
        });

        let satisfied = match (rule, target) {
            (_, Some(t)) => n >= t,
            (StopRule::Residual(eps), None) => residual + eta <= one_minus * eps,
            (StopRule::AprioriGeo(eps), None) => phi_geo_col <= eps,
            (StopRule::AprioriGauge(eps), None) => exact_gauge <= eps,
            (StopRule::FixedCount(_), None) => unreachable!("fixed count always has a target"),
        };
        if satisfied || n >= max_iter {
            let certified_error = phi_geo_col.min(exact_gauge).min(residual_bound);
            let stop_reason = if satisfied {
                StopReason::RuleSatisfied
            } else {
                StopReason::MaxIterExhausted
            };
            return Ok(IterationTrace {
                rows,
                iterates,
                iterate: current,
                certified_error,
                stop_reason,
                rule,
                steps: n,
                complete: satisfied,
                kappa,
                delta0,
            });
        }

        apriori = kappa * apriori + eta;
        gauge_r = gauge.eval(gauge_r)?;
        prev = Some((residual, eta));
        iterates.push(next.clone());
        current = next;
    }
    unreachable!("iteration loop returns")
}
