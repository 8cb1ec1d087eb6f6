//! Contractive gauges and the quantities derived from them: the certified
//! local modulus, the scalar radius recursion, a priori bound functions and
//! the stopping indices they induce.
//!
//! A gauge `ω(·; θ)` maps `[0, ∞)` into itself with `ω(0) = 0`, is
//! nondecreasing, and satisfies `ω(r) < r` for `r > 0`. On a working radius
//! `R` its local modulus is `κ(R) = sup_{0<r≤R} ω(r)/r`; once `κ(R) < 1` is
//! certified, every bound in this module is a plain scalar computation.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::scalar::Scalar;

/// Relative safety margin added to moduli obtained from evaluating the gauge
/// instead of from a closed form.
pub const MODULUS_SAFETY_MARGIN: f64 = 1e-12;

/// Relative trigger for truncating the gauge-iterate tail series.
pub const TAIL_TRUNCATION_RATIO: f64 = 1e-3;

/// Upper limit on the incremental scan performed by [`Gauge::stopping_index`].
pub const STOPPING_SCAN_CAP: usize = 10_000_000;

const TAIL_TERM_CAP: usize = 1_000_000;

/// User-supplied gauge.
///
/// Implementors provide `ω` itself and declare whether `r ↦ ω(r)/r` is
/// nondecreasing. Only with that declaration can the supremum defining the
/// local modulus be read off at the right end of the working range.
pub trait CustomGauge<S: Scalar>: Debug + Send + Sync {
    fn eval(&self, r: S) -> S;

    fn ratio_nondecreasing(&self) -> bool {
        false
    }

    /// Parameter vector `θ`.
    fn parameters(&self) -> Vec<S> {
        Vec::new()
    }
}

/// Power-defect gauge `ω(r) = r − c·r²`, frozen at its maximum `1/(4c)` past
/// `r = 1/(2c)` so that it stays nondecreasing.
///
/// Its ratio `1 − c·r` tends to one at the origin, so no modulus below one
/// exists on any radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDefect<S> {
    pub c: S,
}

impl<S: Scalar> CustomGauge<S> for PowerDefect<S> {
    fn eval(&self, r: S) -> S {
        let knee = S::one() / (S::lit(2.0) * self.c);
        if r <= knee {
            r - self.c * r * r
        } else {
            S::one() / (S::lit(4.0) * self.c)
        }
    }

    fn parameters(&self) -> Vec<S> {
        vec![self.c]
    }
}

#[derive(Debug, Clone)]
pub enum Gauge<S: Scalar> {
    /// `ω(r) = q·r`.
    Geometric {
        q: S,
    },
    /// `ω(r) = r − c·r = (1 − c)·r`.
    LinearDefect {
        c: S,
    },
    Custom(Arc<dyn CustomGauge<S>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModulusMethod {
    Analytic,
    GridSupWithMonotoneRatio,
}

/// A value `κ < 1` with `ω(r) ≤ κ·r` on `(0, radius]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedModulus<S> {
    kappa: S,
    radius: S,
    method: ModulusMethod,
}

impl<S: Scalar> CertifiedModulus<S> {
    pub fn kappa(&self) -> S {
        self.kappa
    }

    pub fn radius(&self) -> S {
        self.radius
    }

    pub fn method(&self) -> ModulusMethod {
        self.method
    }
}

impl<S: Scalar> Gauge<S> {
    /// Geometric gauge with ratio `q ∈ [0, 1)`. `q = 0` is the constant map.
    pub fn geometric(q: S) -> Result<Self> {
        if !(q >= S::zero() && q < S::one()) {
            return Err(domain(format!("geometric ratio {q} outside [0, 1)")));
        }
        Ok(Gauge::Geometric { q })
    }

    /// Linear defect gauge with rate `c ∈ (0, 1]`.
    pub fn linear_defect(c: S) -> Result<Self> {
        if !(c > S::zero() && c <= S::one()) {
            return Err(domain(format!("defect rate {c} outside (0, 1]")));
        }
        Ok(Gauge::LinearDefect { c })
    }

    /// Wraps a custom gauge after spot-checking the gauge axioms on a
    /// logarithmic lattice of radii.
    pub fn custom(gauge: Arc<dyn CustomGauge<S>>) -> Result<Self> {
        if gauge.eval(S::zero()) != S::zero() {
            return Err(domain("custom gauge does not vanish at 0"));
        }
        let mut prev = S::zero();
        for k in -12..=6 {
            for mantissa in [1.0, 2.5, 5.0] {
                let r = S::lit(mantissa * 10f64.powi(k));
                if r <= S::zero() || !r.is_finite() {
                    continue;
                }
                let w = gauge.eval(r);
                if !w.is_finite() || w < S::zero() {
                    return Err(domain(format!("custom gauge gives {w} at r = {r}")));
                }
                if w >= r {
                    return Err(domain(format!(
                        "custom gauge not below identity at r = {r}"
                    )));
                }
                if w < prev {
                    return Err(domain(format!("custom gauge decreases near r = {r}")));
                }
                prev = w;
            }
        }
        Ok(Gauge::Custom(gauge))
    }

    pub fn parameters(&self) -> Vec<S> {
        match self {
            Gauge::Geometric { q } => vec![*q],
            Gauge::LinearDefect { c } => vec![*c],
            Gauge::Custom(g) => g.parameters(),
        }
    }

    pub fn eval(&self, r: S) -> Result<S> {
        if r.is_nan() || r < S::zero() {
            return Err(domain(format!("gauge evaluated at negative radius {r}")));
        }
        Ok(self.eval_unchecked(r))
    }

    fn eval_unchecked(&self, r: S) -> S {
        match self {
            Gauge::Geometric { q } => *q * r,
            Gauge::LinearDefect { c } => r - *c * r,
            Gauge::Custom(g) => g.eval(r),
        }
    }

    /// Certifies `κ(R) = sup_{0<r≤R} ω(r)/r < 1`.
    pub fn certify_modulus(&self, radius: S) -> Result<CertifiedModulus<S>> {
        if !(radius > S::zero()) || !radius.is_finite() {
            return Err(domain(format!("working radius {radius} must be positive")));
        }
        let (kappa, method) = match self {
            Gauge::Geometric { q } => (*q, ModulusMethod::Analytic),
            Gauge::LinearDefect { c } => (S::one() - *c, ModulusMethod::Analytic),
            Gauge::Custom(g) => {
                if g.ratio_nondecreasing() {
                    let ratio = g.eval(radius) / radius;
                    let kappa = ratio * (S::one() + S::lit(MODULUS_SAFETY_MARGIN));
                    (kappa, ModulusMethod::GridSupWithMonotoneRatio)
                } else {
                    // Without monotonicity the sup may sit at r → 0; probe there
                    // to tell a definite failure from a merely undeclared shape.
                    let near_origin = (1..=12)
                        .map(|k| {
                            let r = radius * S::lit(10f64.powi(-k));
                            g.eval(r) / r
                        })
                        .fold(S::zero(), S::max);
                    let reason = if near_origin >= S::one() - S::lit(1e-6) {
                        "sup ratio reaches 1"
                    } else {
                        "ratio monotonicity undeclared"
                    };
                    return Err(Error::NotCertifiable {
                        reason: reason.to_string(),
                    });
                }
            }
        };
        if !(kappa < S::one()) {
            return Err(Error::NotCertifiable {
                reason: "sup ratio reaches 1".to_string(),
            });
        }
        Ok(CertifiedModulus {
            kappa,
            radius,
            method,
        })
    }

    /// `[ω⁽⁰⁾(r0), …, ω⁽ⁿ⁾(r0)]`.
    pub fn orbit(&self, r0: S, n: usize) -> Result<Vec<S>> {
        if r0.is_nan() || r0 < S::zero() {
            return Err(domain(format!("orbit start {r0} is negative")));
        }
        let mut out = Vec::with_capacity(n + 1);
        let mut r = r0;
        out.push(r);
        for _ in 0..n {
            r = self.eval_unchecked(r);
            out.push(r);
        }
        Ok(out)
    }

    /// Upper bound on the tail `Σ_{j≥n} ω⁽ʲ⁾(δ0)`, never above
    /// [`phi_geo`]`(n, κ, δ0)`.
    pub fn tail_bound(&self, n: usize, delta0: S, modulus: &CertifiedModulus<S>) -> Result<S> {
        check_tail_inputs(delta0, modulus)?;
        let mut r = delta0;
        for _ in 0..n {
            if r == S::zero() {
                break;
            }
            r = self.eval_unchecked(r);
        }
        Ok(self.tail_from(r, n, delta0, modulus))
    }

    /// Series from the `n`-th orbit value `r_n` on, truncated with the
    /// certified geometric remainder and capped by the closed form.
    pub(crate) fn tail_from(
        &self,
        r_n: S,
        n: usize,
        delta0: S,
        modulus: &CertifiedModulus<S>,
    ) -> S {
        let kappa = modulus.kappa;
        let geo = phi_geo_unchecked(n, kappa, delta0);
        let trigger = S::lit(TAIL_TRUNCATION_RATIO);
        let mut partial = S::zero();
        let mut r = r_n;
        let mut terms = 0;
        loop {
            partial = partial + r;
            terms += 1;
            if r <= trigger * partial || terms >= TAIL_TERM_CAP {
                break;
            }
            r = self.eval_unchecked(r);
        }
        let series = partial + r * kappa / (S::one() - kappa);
        series.min(geo)
    }

    /// Smallest `n` with [`Gauge::tail_bound`]`(n) ≤ eps`.
    pub fn stopping_index(
        &self,
        eps: S,
        delta0: S,
        modulus: &CertifiedModulus<S>,
    ) -> Result<usize> {
        if !(eps > S::zero()) {
            return Err(domain(format!("tolerance {eps} must be positive")));
        }
        check_tail_inputs(delta0, modulus)?;
        let mut r = delta0;
        for n in 0..=STOPPING_SCAN_CAP {
            if self.tail_from(r, n, delta0, modulus) <= eps {
                return Ok(n);
            }
            r = self.eval_unchecked(r);
        }
        Err(Error::NotCertifiable {
            reason: format!("stopping-index scan exceeded {STOPPING_SCAN_CAP} iterations"),
        })
    }
}

fn check_tail_inputs<S: Scalar>(delta0: S, modulus: &CertifiedModulus<S>) -> Result<()> {
    if delta0.is_nan() || delta0 < S::zero() {
        return Err(domain(format!("initial defect {delta0} is negative")));
    }
    if delta0 > modulus.radius {
        return Err(domain(format!(
            "initial defect {delta0} exceeds certified radius {}",
            modulus.radius
        )));
    }
    Ok(())
}

fn check_kappa<S: Scalar>(kappa: S) -> Result<()> {
    if !(kappa >= S::zero() && kappa < S::one()) {
        return Err(domain(format!("modulus {kappa} outside [0, 1)")));
    }
    Ok(())
}

pub(crate) fn pow_count<S: Scalar>(base: S, n: usize) -> S {
    match i32::try_from(n) {
        Ok(k) => base.powi(k),
        Err(_) => base.powf(S::count(n)),
    }
}

fn phi_geo_unchecked<S: Scalar>(n: usize, kappa: S, delta0: S) -> S {
    if delta0 == S::zero() {
        return S::zero();
    }
    pow_count(kappa, n) * delta0 / (S::one() - kappa)
}

/// Geometric a priori bound `κⁿ·δ0 / (1 − κ)`.
pub fn phi_geo<S: Scalar>(n: usize, kappa: S, delta0: S) -> Result<S> {
    check_kappa(kappa)?;
    if delta0.is_nan() || delta0 < S::zero() {
        return Err(domain(format!("initial defect {delta0} is negative")));
    }
    Ok(phi_geo_unchecked(n, kappa, delta0))
}

/// Smallest `n` with `phi_geo(n) ≤ eps`, via the logarithmic closed form
/// followed by a one-step repair against rounding in `ln`/`ceil`.
pub fn n_geo<S: Scalar>(eps: S, kappa: S, delta0: S) -> Result<usize> {
    check_kappa(kappa)?;
    if !(eps > S::zero()) {
        return Err(domain(format!("tolerance {eps} must be positive")));
    }
    if delta0.is_nan() || delta0 < S::zero() {
        return Err(domain(format!("initial defect {delta0} is negative")));
    }
    if delta0 <= (S::one() - kappa) * eps {
        return Ok(0);
    }
    if kappa == S::zero() {
        return Ok(1);
    }
    let raw = (((S::one() - kappa) * eps / delta0).ln() / kappa.ln()).ceil();
    let mut n = raw
        .to_usize()
        .ok_or_else(|| domain(format!("stopping index {raw} not representable")))?;
    while n > 0 && phi_geo_unchecked(n - 1, kappa, delta0) <= eps {
        n -= 1;
    }
    while phi_geo_unchecked(n, kappa, delta0) > eps {
        n += 1;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_scan(eps: f64, kappa: f64, delta0: f64) -> usize {
        (0..)
            .find(|&n| kappa.powi(n as i32) * delta0 / (1.0 - kappa) <= eps)
            .unwrap()
    }

    #[test]
    fn eval_examples() {
        let g = Gauge::geometric(0.5).unwrap();
        assert_eq!(g.eval(1.0).unwrap(), 0.5);
        assert_eq!(g.eval(0.0).unwrap(), 0.0);
        let d = Gauge::linear_defect(0.3).unwrap();
        assert!((d.eval(2.0f64).unwrap() - 1.4).abs() < 1e-15);
        assert_eq!(d.eval(0.0).unwrap(), 0.0);
        assert!(matches!(g.eval(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn constructor_ranges() {
        assert!(Gauge::geometric(1.0).is_err());
        assert!(Gauge::geometric(-0.1).is_err());
        assert!(Gauge::geometric(0.0).is_ok());
        assert!(Gauge::linear_defect(0.0).is_err());
        assert!(Gauge::linear_defect(1.0).is_ok());
    }

    #[test]
    fn certify_closed_forms() {
        let m = Gauge::geometric(0.5).unwrap().certify_modulus(2.0).unwrap();
        assert_eq!(m.kappa(), 0.5);
        assert_eq!(m.method(), ModulusMethod::Analytic);
        let m = Gauge::linear_defect(0.3)
            .unwrap()
            .certify_modulus(5.0)
            .unwrap();
        assert!((m.kappa() - 0.7f64).abs() < 1e-15);
        assert!(Gauge::geometric(0.5).unwrap().certify_modulus(0.0).is_err());
    }

    #[test]
    fn power_defect_ratio_tends_to_one() {
        // oracle: ratio sampled toward the origin
        let pd = PowerDefect { c: 0.5f64 };
        let sup = (1..=12)
            .map(|k| {
                let r = 10f64.powi(-k);
                pd.eval(r) / r
            })
            .fold(0.0, f64::max);
        assert!(sup > 1.0 - 1e-11);

        let g = Gauge::custom(Arc::new(pd)).unwrap();
        match g.certify_modulus(1.0) {
            Err(Error::NotCertifiable { reason }) => assert_eq!(reason, "sup ratio reaches 1"),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[derive(Debug)]
    struct Saturating {
        declared: bool,
    }

    impl CustomGauge<f64> for Saturating {
        // ratio 0.5·r/(1+r) is increasing
        fn eval(&self, r: f64) -> f64 {
            0.5 * r * r / (1.0 + r)
        }
        fn ratio_nondecreasing(&self) -> bool {
            self.declared
        }
    }

    #[test]
    fn custom_monotone_ratio_is_certified_at_right_end() {
        let g = Gauge::custom(Arc::new(Saturating { declared: true })).unwrap();
        let m = g.certify_modulus(3.0).unwrap();
        let exact = 0.5 * 3.0 / 4.0;
        assert_eq!(m.method(), ModulusMethod::GridSupWithMonotoneRatio);
        assert!(m.kappa() >= exact && m.kappa() <= exact * (1.0 + 2e-12));
        for k in 1..=300 {
            let r = 3.0 * k as f64 / 300.0;
            assert!(g.eval(r).unwrap() <= m.kappa() * r);
        }
    }

    #[test]
    fn custom_undeclared_is_refused() {
        let g = Gauge::custom(Arc::new(Saturating { declared: false })).unwrap();
        match g.certify_modulus(3.0) {
            Err(Error::NotCertifiable { reason }) => {
                assert_eq!(reason, "ratio monotonicity undeclared")
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[derive(Debug)]
    struct NotAGauge;
    impl CustomGauge<f64> for NotAGauge {
        fn eval(&self, r: f64) -> f64 {
            r
        }
    }

    #[test]
    fn custom_axioms_checked() {
        assert!(Gauge::custom(Arc::new(NotAGauge)).is_err());
    }

    #[test]
    fn orbit_examples() {
        let g = Gauge::geometric(0.5).unwrap();
        assert_eq!(g.orbit(1.0, 3).unwrap(), vec![1.0, 0.5, 0.25, 0.125]);
        assert_eq!(g.orbit(0.0, 5).unwrap(), vec![0.0; 6]);
        let d = Gauge::linear_defect(0.3).unwrap();
        let o = d.orbit(2.0, 2).unwrap();
        assert!((o[1] - 1.4f64).abs() < 1e-15 && (o[2] - 0.98f64).abs() < 1e-15);
    }

    #[test]
    fn phi_geo_examples() {
        assert_eq!(phi_geo(0, 0.5, 1.0).unwrap(), 2.0);
        assert_eq!(phi_geo(3, 0.5, 1.0).unwrap(), 0.25);
        assert_eq!(phi_geo(7, 0.3, 0.0).unwrap(), 0.0);
        assert!(phi_geo(1, 1.0, 1.0).is_err());
    }

    #[test]
    fn tail_bound_examples() {
        let g = Gauge::geometric(0.5).unwrap();
        let m = g.certify_modulus(2.0).unwrap();
        assert!((g.tail_bound(2, 1.0f64, &m).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(g.tail_bound(0, 0.0, &m).unwrap(), 0.0);

        let d = Gauge::linear_defect(0.3).unwrap();
        let md = d.certify_modulus(2.0).unwrap();
        let oracle: f64 = (0..200).map(|j| 0.7f64.powi(j)).sum();
        let got = d.tail_bound(0, 1.0, &md).unwrap();
        assert!((got - oracle).abs() < 1e-12, "{got} vs {oracle}");
        assert!((got - 1.0 / 0.3).abs() < 1e-12);

        assert!(g.tail_bound(0, 3.0, &m).is_err());
    }

    #[test]
    fn n_geo_examples() {
        assert_eq!(n_geo(1e-6, 0.5, 1.0).unwrap(), 21);
        assert_eq!(linear_scan(1e-6, 0.5, 1.0), 21);
        assert_eq!(n_geo(1e-6, 0.5, 0.0).unwrap(), 0);
        assert_eq!(n_geo(10.0, 0.5, 1.0).unwrap(), 0);
        assert_eq!(n_geo(1e-3, 0.0, 1.0).unwrap(), 1);
        assert!(n_geo(1e-3, 1.0, 1.0).is_err());
    }

    #[test]
    fn n_geo_matches_linear_scan() {
        for &kappa in &[0.1, 0.25, 0.5, 0.75, 0.9, 0.99] {
            for &delta0 in &[1e-3, 0.5, 1.0, 7.0] {
                for &eps in &[1e-1, 1e-4, 1e-8, 1e-12] {
                    assert_eq!(
                        n_geo(eps, kappa, delta0).unwrap(),
                        linear_scan(eps, kappa, delta0),
                        "eps={eps} kappa={kappa} delta0={delta0}"
                    );
                }
            }
        }
    }

    #[test]
    fn stopping_index_examples() {
        let g = Gauge::geometric(0.5).unwrap();
        let m = g.certify_modulus(2.0).unwrap();
        assert_eq!(g.stopping_index(0.3, 1.0, &m).unwrap(), 3);
        assert_eq!(g.stopping_index(0.3, 0.0, &m).unwrap(), 0);
        let d = Gauge::linear_defect(0.3).unwrap();
        let md = d.certify_modulus(2.0).unwrap();
        assert_eq!(d.stopping_index(4.0, 1.0, &md).unwrap(), 0);
    }

    #[test]
    fn works_in_single_precision() {
        let g = Gauge::<f32>::geometric(0.5).unwrap();
        let m = g.certify_modulus(2.0).unwrap();
        assert_eq!(g.tail_bound(2, 1.0, &m).unwrap(), 0.5);
        assert_eq!(n_geo(1e-3f32, 0.5, 1.0).unwrap(), 11);
    }
}
