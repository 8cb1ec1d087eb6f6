//! Sampled diagnostics: gauge dominance (two-point and Proinov controls) and
//! order-interval invariance for monotone Volterra problems.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::funcspace::{random_profile, sample_ball, sup_distance, BallRegion, GridFunction};
use crate::gauge::Gauge;
use crate::operators::{FixedPointOperator, OperatorKind};
use crate::scalar::Scalar;

/// Ratios up to `1 + DOMINANCE_TOLERANCE` count as consistent.
pub const DOMINANCE_TOLERANCE: f64 = 1e-9;

/// `max{d(x,y), d(x,Tx), d(y,Ty), ½(d(x,Ty) + d(y,Tx))}`.
pub fn proinov_control<S: Scalar>(
    operator: &FixedPointOperator<S>,
    x: &GridFunction<S>,
    y: &GridFunction<S>,
) -> Result<S> {
    let tx = operator.apply(x)?;
    let ty = operator.apply(y)?;
    proinov_from_images(x, y, &tx, &ty)
}

fn proinov_from_images<S: Scalar>(
    x: &GridFunction<S>,
    y: &GridFunction<S>,
    tx: &GridFunction<S>,
    ty: &GridFunction<S>,
) -> Result<S> {
    let half = S::lit(0.5);
    Ok(sup_distance(x, y)?
        .max(sup_distance(x, tx)?)
        .max(sup_distance(y, ty)?)
        .max(half * (sup_distance(x, ty)? + sup_distance(y, tx)?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlMode {
    TwoPoint,
    Proinov,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport<S> {
    /// Largest `d(Tx,Ty) / ω(control)` over the sampled pairs.
    pub max_ratio: S,
    pub consistent: bool,
    /// Pair attaining `max_ratio`.
    pub witness: Option<(GridFunction<S>, GridFunction<S>)>,
    /// `d(Tx,Ty) / control` at the witness pair.
    pub witness_contraction_ratio: Option<S>,
    pub pairs_checked: usize,
    /// Pairs skipped because the control vanished.
    pub pairs_skipped: usize,
}

/// Checks `d(Tx, Ty) ≤ ω(control(x, y))` on all pairs of `samples` functions
/// drawn from `region`.
pub fn gauge_dominance_check<S: Scalar>(
    operator: &FixedPointOperator<S>,
    gauge: &Gauge<S>,
    region: &BallRegion<S>,
    mode: ControlMode,
    samples: usize,
    seed: u64,
) -> Result<DominanceReport<S>> {
    if samples < 2 {
        return Err(Error::Precondition(
            "dominance check needs at least two samples".into(),
        ));
    }
    let xs = sample_ball(region, samples, seed);
    let images = xs
        .iter()
        .map(|x| operator.apply(x))
        .collect::<Result<Vec<_>>>()?;
    let mut report = DominanceReport {
        max_ratio: S::zero(),
        consistent: true,
        witness: None,
        witness_contraction_ratio: None,
        pairs_checked: 0,
        pairs_skipped: 0,
    };
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let control = match mode {
                ControlMode::TwoPoint => sup_distance(&xs[i], &xs[j])?,
                ControlMode::Proinov => {
                    proinov_from_images(&xs[i], &xs[j], &images[i], &images[j])?
                }
            };
            if control == S::zero() {
                report.pairs_skipped += 1;
                continue;
            }
            report.pairs_checked += 1;
            let image_gap = sup_distance(&images[i], &images[j])?;
            let omega = gauge.eval(control)?;
            let ratio = if omega > S::zero() {
                image_gap / omega
            } else if image_gap <= S::epsilon() * control {
                S::zero()
            } else {
                S::infinity()
            };
            if report.witness.is_none() || ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.witness = Some((xs[i].clone(), xs[j].clone()));
                report.witness_contraction_ratio = Some(image_gap / control);
            }
        }
    }
    report.consistent = report.max_ratio <= S::one() + S::tolerance(DOMINANCE_TOLERANCE);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub enum OrderPrecondition {
    NotVolterra,
    NegativeKernel { row: usize, col: usize, value: f64 },
    NonlinearityDecreasing { drop: f64 },
    BoundsCrossed { node: usize },
    LowerNotSubsolution { node: usize, gap: f64 },
    UpperNotSupersolution { node: usize, gap: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum OrderIntervalVerdict {
    Invariant,
    Violated { sample: usize, node: usize },
    PreconditionFailed(OrderPrecondition),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderIntervalReport<S> {
    pub verdict: OrderIntervalVerdict,
    /// `min` over samples and nodes of `min(Tx − m, M − Tx)`.
    pub worst_margin: S,
    pub samples_checked: usize,
}

/// Verifies that `[lower, upper]` is mapped into itself by a monotone
/// Volterra operator, on `samples` functions drawn between the bounds.
pub fn order_interval_check<S: Scalar>(
    operator: &FixedPointOperator<S>,
    lower: &GridFunction<S>,
    upper: &GridFunction<S>,
    samples: usize,
    seed: u64,
) -> Result<OrderIntervalReport<S>> {
    let grid = *operator.grid();
    grid.check_same(lower.grid())?;
    grid.check_same(upper.grid())?;
    let scale = S::one() + lower.sup_norm().max(upper.sup_norm());
    let tol = S::lit(1e-12) * scale;
    let failed = |p: OrderPrecondition| OrderIntervalReport {
        verdict: OrderIntervalVerdict::PreconditionFailed(p),
        worst_margin: S::neg_infinity(),
        samples_checked: 0,
    };

    let (Some(model), Some(kernel)) = (operator.model(), operator.discrete_kernel()) else {
        return Ok(failed(OrderPrecondition::NotVolterra));
    };
    if operator.kind() != OperatorKind::Volterra {
        return Ok(failed(OrderPrecondition::NotVolterra));
    }
    let m = grid.size();
    for i in 0..m {
        for j in 0..=i {
            let k = kernel.at(i, j);
            if k < S::zero() {
                return Ok(failed(OrderPrecondition::NegativeKernel {
                    row: i,
                    col: j,
                    value: k.to_f64_lossy(),
                }));
            }
        }
    }
    let lo = lower.values().iter().fold(S::infinity(), |a, &b| a.min(b));
    let hi = upper
        .values()
        .iter()
        .fold(S::neg_infinity(), |a, &b| a.max(b));
    let drop = model
        .nonlinearity
        .worst_decrease(&grid.interval(), lo, hi.max(lo))?;
    if drop > tol {
        return Ok(failed(OrderPrecondition::NonlinearityDecreasing {
            drop: drop.to_f64_lossy(),
        }));
    }
    if let Some(node) = lower
        .values()
        .iter()
        .zip(upper.values())
        .position(|(&l, &u)| l > u)
    {
        return Ok(failed(OrderPrecondition::BoundsCrossed { node }));
    }
    let t_lower = operator.apply(lower)?;
    let t_upper = operator.apply(upper)?;
    for i in 0..m {
        let gap = lower.values()[i] - t_lower.values()[i];
        if gap > tol {
            return Ok(failed(OrderPrecondition::LowerNotSubsolution {
                node: i,
                gap: gap.to_f64_lossy(),
            }));
        }
        let gap = t_upper.values()[i] - upper.values()[i];
        if gap > tol {
            return Ok(failed(OrderPrecondition::UpperNotSupersolution {
                node: i,
                gap: gap.to_f64_lossy(),
            }));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = S::infinity();
    let mut verdict = OrderIntervalVerdict::Invariant;
    for k in 0..samples {
        // weights in [0, 1]: lower, upper, midpoint, then random profiles
        let weights: Vec<S> = match k {
            0 => vec![S::zero(); m],
            1 => vec![S::one(); m],
            2 => vec![S::lit(0.5); m],
            _ => random_profile(&grid, &mut rng)
                .into_iter()
                .map(|p| ((p + S::one()) * S::lit(0.5)).max(S::zero()).min(S::one()))
                .collect(),
        };
        let x = GridFunction::new(
            grid,
            lower
                .values()
                .iter()
                .zip(upper.values())
                .zip(&weights)
                .map(|((&l, &u), &w)| (l + w * (u - l)).max(l).min(u))
                .collect(),
        )?;
        let tx = operator.apply(&x)?;
        for i in 0..m {
            let margin =
                (tx.values()[i] - lower.values()[i]).min(upper.values()[i] - tx.values()[i]);
            if margin < worst {
                worst = margin;
            }
            if margin < -tol && verdict == OrderIntervalVerdict::Invariant {
                verdict = OrderIntervalVerdict::Violated { sample: k, node: i };
            }
        }
    }
    Ok(OrderIntervalReport {
        verdict,
        worst_margin: worst,
        samples_checked: samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{Grid, Interval};
    use crate::operators::{Kernel, Nonlinearity, Profile};

    fn unit(m: usize) -> Grid<f64> {
        Grid::new(Interval::unit(), m).unwrap()
    }

    fn worked() -> FixedPointOperator<f64> {
        FixedPointOperator::hammerstein(
            unit(101),
            Profile::parse("t").unwrap(),
            Kernel::separable_from_strings(&[("t", "1"), ("1", "s")]).unwrap(),
            Nonlinearity::linear(1.0 / 3.0),
        )
        .unwrap()
    }

    fn volterra(f: Nonlinearity<f64>) -> FixedPointOperator<f64> {
        FixedPointOperator::volterra(
            unit(101),
            Profile::parse("t").unwrap(),
            Kernel::separable_from_strings(&[("t", "1"), ("1", "s")]).unwrap(),
            f,
        )
        .unwrap()
    }

    #[test]
    fn proinov_examples() {
        let op = FixedPointOperator::affine_scalar(0.5, 1.0).unwrap();
        let g = Grid::scalar();
        let fixed = GridFunction::constant(g, 2.0);
        assert_eq!(proinov_control(&op, &fixed, &fixed).unwrap(), 0.0);
        let x = GridFunction::constant(g, 5.0);
        let tx = op.apply(&x).unwrap();
        assert_eq!(
            proinov_control(&op, &x, &x).unwrap(),
            sup_distance(&x, &tx).unwrap()
        );
    }

    #[test]
    fn two_fixed_points_control_is_their_distance() {
        // the identity map on the scalar line fixes everything
        let id = FixedPointOperator::affine_scalar(1.0, 0.0).unwrap();
        let g = Grid::scalar();
        let a = GridFunction::constant(g, -1.0);
        let b = GridFunction::constant(g, 2.5);
        assert_eq!(proinov_control(&id, &a, &b).unwrap(), 3.5);
    }

    #[test]
    fn dominance_accepts_true_modulus_and_rejects_smaller() {
        let op = worked();
        let region = BallRegion::new(GridFunction::zero(*op.grid()), 2.0).unwrap();
        let ok = gauge_dominance_check(
            &op,
            &Gauge::geometric(0.5).unwrap(),
            &region,
            ControlMode::TwoPoint,
            16,
            1,
        )
        .unwrap();
        assert!(ok.consistent, "{}", ok.max_ratio);
        let bad = gauge_dominance_check(
            &op,
            &Gauge::geometric(0.4).unwrap(),
            &region,
            ControlMode::TwoPoint,
            16,
            1,
        )
        .unwrap();
        assert!(!bad.consistent);
        let (x, y) = bad.witness.unwrap();
        let lip = sup_distance(&op.apply(&x).unwrap(), &op.apply(&y).unwrap()).unwrap()
            / sup_distance(&x, &y).unwrap();
        assert!(lip > 0.4);

        let prox = gauge_dominance_check(
            &op,
            &Gauge::geometric(0.5).unwrap(),
            &region,
            ControlMode::Proinov,
            16,
            1,
        )
        .unwrap();
        assert!(prox.consistent);
    }

    #[test]
    fn identical_pairs_skipped() {
        let op = worked();
        let region = BallRegion::new(GridFunction::zero(*op.grid()), 0.0).unwrap();
        let r = gauge_dominance_check(
            &op,
            &Gauge::geometric(0.5).unwrap(),
            &region,
            ControlMode::TwoPoint,
            4,
            0,
        )
        .unwrap();
        assert_eq!(r.pairs_checked, 0);
        assert_eq!(r.pairs_skipped, 6);
        assert!(r.consistent);
    }

    #[test]
    fn order_interval_invariant_for_monotone_volterra() {
        let op = volterra(Nonlinearity::linear(1.0 / 3.0));
        let g = *op.grid();
        let lower = GridFunction::constant(g, -2.0);
        let upper = GridFunction::constant(g, 2.0);
        let r = order_interval_check(&op, &lower, &upper, 100, 3).unwrap();
        assert_eq!(r.verdict, OrderIntervalVerdict::Invariant);
        assert!(r.worst_margin >= -1e-12);
    }

    #[test]
    fn order_interval_degenerate_at_fixed_point() {
        let op = volterra(Nonlinearity::linear(1.0 / 3.0));
        let mut x = GridFunction::zero(*op.grid());
        for _ in 0..200 {
            x = op.apply(&x).unwrap();
        }
        let r = order_interval_check(&op, &x, &x, 10, 0).unwrap();
        assert_eq!(r.verdict, OrderIntervalVerdict::Invariant);
    }

    #[test]
    fn order_interval_preconditions() {
        let dec = volterra(Nonlinearity::parse_expression("-u/3", 1.0 / 3.0, 0.0).unwrap());
        let g = *dec.grid();
        let lower = GridFunction::constant(g, -2.0);
        let upper = GridFunction::constant(g, 2.0);
        let r = order_interval_check(&dec, &lower, &upper, 10, 0).unwrap();
        assert!(matches!(
            r.verdict,
            OrderIntervalVerdict::PreconditionFailed(
                OrderPrecondition::NonlinearityDecreasing { .. }
            )
        ));

        let inc = volterra(Nonlinearity::linear(1.0 / 3.0));
        let tight = GridFunction::constant(g, 0.1);
        let r = order_interval_check(&inc, &lower, &tight, 10, 0).unwrap();
        assert!(matches!(
            r.verdict,
            OrderIntervalVerdict::PreconditionFailed(
                OrderPrecondition::UpperNotSupersolution { .. }
            )
        ));

        let r = order_interval_check(&worked(), &lower, &upper, 10, 0).unwrap();
        assert_eq!(
            r.verdict,
            OrderIntervalVerdict::PreconditionFailed(OrderPrecondition::NotVolterra)
        );
    }
}
