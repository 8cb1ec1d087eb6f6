//! Nonlinearities `f(s, u)` with declared, sample-verified Lipschitz and
//! zero-level constants.

use crate::error::{domain, Error, Result};
use crate::funcspace::{GridFunction, Interval};
use crate::operators::expr::{Bindings, Expr, Var};
use crate::operators::kernel::Profile;
use crate::scalar::Scalar;

/// Points per axis of the verification lattice.
pub const LATTICE_POINTS: usize = 64;

/// Relative slack allowed when comparing sampled quantities to declared ones.
pub const DECLARED_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearRule<S> {
    /// `λ·u`
    Linear(S),
    /// `λ·sin u`
    ScaledSin(S),
    /// `λ·atan u`
    ScaledAtan(S),
    /// `λ·u + h(s)`
    Affine { lambda: S, offset: Profile<S> },
    /// Formula in `s` and `u`.
    Expression(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity<S> {
    rule: NonlinearRule<S>,
    lip: S,
    zero_bound: S,
}

/// Sampled evidence for the declared constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeEvidence<S> {
    pub max_quotient: S,
    pub max_zero_level: S,
    pub u_range: S,
}

impl<S: Scalar> Nonlinearity<S> {
    pub fn new(rule: NonlinearRule<S>, lip: S, zero_bound: S) -> Result<Self> {
        if !(lip >= S::zero()) || !lip.is_finite() {
            return Err(domain(format!("declared Lipschitz constant {lip} invalid")));
        }
        if !(zero_bound >= S::zero()) || !zero_bound.is_finite() {
            return Err(domain(format!("declared zero bound {zero_bound} invalid")));
        }
        Ok(Nonlinearity {
            rule,
            lip,
            zero_bound,
        })
    }

    /// `λ·u` with its exact constants `|λ|` and `0`.
    pub fn linear(lambda: S) -> Self {
        Nonlinearity {
            rule: NonlinearRule::Linear(lambda),
            lip: lambda.abs(),
            zero_bound: S::zero(),
        }
    }

    pub fn parse_expression(src: &str, lip: S, zero_bound: S) -> Result<Self> {
        Self::new(
            NonlinearRule::Expression(Expr::parse(src, &[Var::S, Var::U])?),
            lip,
            zero_bound,
        )
    }

    pub fn rule(&self) -> &NonlinearRule<S> {
        &self.rule
    }

    pub fn lip(&self) -> S {
        self.lip
    }

    pub fn zero_bound(&self) -> S {
        self.zero_bound
    }

    pub fn eval(&self, s: S, u: S) -> Result<S> {
        Ok(match &self.rule {
            NonlinearRule::Linear(l) => *l * u,
            NonlinearRule::ScaledSin(l) => *l * u.sin(),
            NonlinearRule::ScaledAtan(l) => *l * u.atan(),
            NonlinearRule::Affine { lambda, offset } => *lambda * u + offset.eval(s)?,
            NonlinearRule::Expression(e) => e.eval(&Bindings::su(s, u))?,
        })
    }

    /// `s_j ↦ f(s_j, x_j)` on the grid of `x`.
    pub fn apply_grid(&self, x: &GridFunction<S>) -> Result<Vec<S>> {
        let grid = *x.grid();
        let offset = match &self.rule {
            NonlinearRule::Affine { offset, .. } => Some(offset.sample(grid)?),
            _ => None,
        };
        let out = grid
            .nodes()
            .zip(x.values())
            .enumerate()
            .map(|(j, (s, &u))| match (&self.rule, &offset) {
                (NonlinearRule::Affine { lambda, .. }, Some(h)) => Ok(*lambda * u + h.values()[j]),
                _ => self.eval(s, u),
            })
            .collect::<Result<Vec<_>>>()?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("nonlinearity".to_string()));
        }
        Ok(out)
    }

    fn lattice(interval: &Interval<S>, radius: S) -> (Vec<S>, Vec<S>) {
        let n = LATTICE_POINTS;
        let span = radius + S::one();
        let s_nodes = (0..n)
            .map(|i| interval.a() + interval.length() * S::count(i) / S::count(n - 1))
            .collect();
        let u_nodes = (0..n)
            .map(|k| -span + S::lit(2.0) * span * S::count(k) / S::count(n - 1))
            .collect();
        (s_nodes, u_nodes)
    }

    /// Samples difference quotients and `|f(s,0)|` on a `64 × 64` lattice
    /// spanning `interval × [−radius−1, radius+1]`.
    pub fn lattice_evidence(
        &self,
        interval: &Interval<S>,
        radius: S,
    ) -> Result<LatticeEvidence<S>> {
        let (s_nodes, u_nodes) = Self::lattice(interval, radius);
        let mut max_quotient = S::zero();
        let mut max_zero_level = S::zero();
        for &s in &s_nodes {
            max_zero_level = max_zero_level.max(self.eval(s, S::zero())?.abs());
            let f: Vec<S> = u_nodes
                .iter()
                .map(|&u| self.eval(s, u))
                .collect::<Result<_>>()?;
            for k in 0..u_nodes.len() {
                for l in k + 1..u_nodes.len() {
                    let q = (f[l] - f[k]).abs() / (u_nodes[l] - u_nodes[k]);
                    max_quotient = max_quotient.max(q);
                }
            }
        }
        if !(max_quotient.is_finite() && max_zero_level.is_finite()) {
            return Err(Error::NonFinite(
                "nonlinearity on verification lattice".to_string(),
            ));
        }
        Ok(LatticeEvidence {
            max_quotient,
            max_zero_level,
            u_range: radius + S::one(),
        })
    }

    /// Rejects declared constants contradicted by the lattice samples.
    pub fn verify_declared(&self, interval: &Interval<S>, radius: S) -> Result<LatticeEvidence<S>> {
        let ev = self.lattice_evidence(interval, radius)?;
        let slack = S::one() + S::tolerance(DECLARED_SLACK);
        if ev.max_quotient > self.lip * slack {
            return Err(Error::Precondition(format!(
                "sampled Lipschitz quotient {} exceeds declared L_f = {}",
                ev.max_quotient, self.lip
            )));
        }
        if ev.max_zero_level > self.zero_bound * slack {
            return Err(Error::Precondition(format!(
                "sampled sup|f(s,0)| = {} exceeds declared bound {}",
                ev.max_zero_level, self.zero_bound
            )));
        }
        Ok(ev)
    }

    /// Largest decrease `f(s,u) − f(s,v)` for `u < v` on a lattice over
    /// `interval × [lo, hi]`; zero means nondecreasing on the samples.
    pub fn worst_decrease(&self, interval: &Interval<S>, lo: S, hi: S) -> Result<S> {
        let n = LATTICE_POINTS;
        let mut worst = S::zero();
        for i in 0..n {
            let s = interval.a() + interval.length() * S::count(i) / S::count(n - 1);
            let mut prev: Option<S> = None;
            for k in 0..n {
                let u = lo + (hi - lo) * S::count(k) / S::count(n - 1);
                let v = self.eval(s, u)?;
                if let Some(p) = prev {
                    worst = worst.max(p - v);
                }
                prev = Some(prev.map_or(v, |p| p.max(v)));
            }
        }
        Ok(worst)
    }
}
