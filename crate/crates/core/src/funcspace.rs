//! Uniform-grid model of `C([a, b])` with the sup norm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::scalar::Scalar;

/// Grid size used when a problem does not specify one.
pub const DEFAULT_GRID_SIZE: usize = 401;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<S> {
    a: S,
    b: S,
}

impl<S: Scalar> Interval<S> {
    pub fn new(a: S, b: S) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(domain(format!(
                "interval [{a}, {b}] is not a proper finite interval"
            )));
        }
        Ok(Interval { a, b })
    }

    pub fn unit() -> Self {
        Interval {
            a: S::zero(),
            b: S::one(),
        }
    }

    pub fn a(&self) -> S {
        self.a
    }

    pub fn b(&self) -> S {
        self.b
    }

    pub fn length(&self) -> S {
        self.b - self.a
    }
}

/// Uniform nodes `t_i = a + i·(b − a)/(m − 1)`; a single-node grid sits at `a`
/// and models the scalar line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid<S> {
    interval: Interval<S>,
    size: usize,
}

impl<S: Scalar> Grid<S> {
    pub fn new(interval: Interval<S>, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(domain("grid needs at least one node"));
        }
        Ok(Grid { interval, size })
    }

    /// One-node grid carrying a real number.
    pub fn scalar() -> Self {
        Grid {
            interval: Interval::unit(),
            size: 1,
        }
    }

    pub fn interval(&self) -> Interval<S> {
        self.interval
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn step(&self) -> S {
        if self.size < 2 {
            return S::zero();
        }
        self.interval.length() / S::count(self.size - 1)
    }

    pub fn node(&self, i: usize) -> S {
        if i + 1 == self.size && self.size > 1 {
            return self.interval.b;
        }
        self.interval.a + S::count(i) * self.step()
    }

    pub fn nodes(&self) -> impl Iterator<Item = S> + '_ {
        (0..self.size).map(move |i| self.node(i))
    }

    /// Grid with `2m − 1` nodes whose even nodes coincide with these.
    pub fn refined(&self) -> Self {
        Grid {
            interval: self.interval,
            size: 2 * self.size - 1,
        }
    }

    /// Index of the node nearest to `t`.
    pub fn nearest_index(&self, t: S) -> usize {
        if self.size < 2 {
            return 0;
        }
        let pos = ((t - self.interval.a) / self.step()).round();
        pos.to_usize().unwrap_or(0).min(self.size - 1)
    }

    /// Composite trapezoid weights over `[t_0, t_k]`.
    pub fn trapezoid_weights(&self, k: usize) -> Vec<S> {
        let h = self.step();
        let half = h / S::lit(2.0);
        let mut w = vec![S::zero(); k + 1];
        if k == 0 {
            return w;
        }
        for wi in w.iter_mut() {
            *wi = h;
        }
        w[0] = half;
        w[k] = half;
        w
    }

    pub(crate) fn check_same(&self, other: &Grid<S>) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "[{}, {}] with {} nodes vs [{}, {}] with {} nodes",
                self.interval.a,
                self.interval.b,
                self.size,
                other.interval.a,
                other.interval.b,
                other.size
            )));
        }
        Ok(())
    }
}

/// A sampled element of `C([a, b])`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<S> {
    grid: Grid<S>,
    values: Vec<S>,
}

impl<S: Scalar> GridFunction<S> {
    pub fn new(grid: Grid<S>, values: Vec<S>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.size()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "grid function value at node {bad}"
            )));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn from_fn(grid: Grid<S>, f: impl Fn(S) -> S) -> Result<Self> {
        let values = grid.nodes().map(f).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid<S>, c: S) -> Self {
        GridFunction {
            grid,
            values: vec![c; grid.size()],
        }
    }

    pub fn zero(grid: Grid<S>) -> Self {
        Self::constant(grid, S::zero())
    }

    /// Wraps an unchecked buffer; callers guarantee finiteness and length.
    pub(crate) fn from_raw(grid: Grid<S>, values: Vec<S>) -> Self {
        debug_assert_eq!(values.len(), grid.size());
        GridFunction { grid, values }
    }

    pub fn grid(&self) -> &Grid<S> {
        &self.grid
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> S {
        self.values.iter().fold(S::zero(), |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(S, S) -> S) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(GridFunction::from_raw(self.grid, values))
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        GridFunction::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x - y)
    }

    pub fn scale(&self, c: S) -> Self {
        self.map(|v| c * v)
    }

    /// Piecewise-linear interpolant evaluated at `t`, clamped to the interval.
    pub fn interpolate(&self, t: S) -> S {
        let m = self.grid.size();
        if m == 1 {
            return self.values[0];
        }
        let iv = self.grid.interval();
        let pos = ((t - iv.a()) / self.grid.step()).max(S::zero());
        let i = pos.floor().to_usize().unwrap_or(0).min(m - 2);
        let frac = (pos - S::count(i)).min(S::one());
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }

    /// Linear interpolation onto another grid over the same interval.
    pub fn resample(&self, grid: Grid<S>) -> Result<Self> {
        if grid.interval() != self.grid.interval() {
            return Err(Error::GridMismatch(
                "resampling across intervals".to_string(),
            ));
        }
        if grid == self.grid {
            return Ok(self.clone());
        }
        Ok(GridFunction::from_raw(
            grid,
            grid.nodes().map(|t| self.interpolate(t)).collect(),
        ))
    }

    /// Restriction from a refined grid back onto every other node.
    pub fn coarsen(&self) -> Result<Self> {
        let m = self.grid.size();
        if m < 3 || m.is_multiple_of(2) {
            return Err(domain(format!("grid of {m} nodes is not a refined grid")));
        }
        let grid = Grid::new(self.grid.interval(), m.div_ceil(2))?;
        Ok(GridFunction::from_raw(
            grid,
            self.values.iter().step_by(2).copied().collect(),
        ))
    }
}

/// `max_i |x_i − y_i|`.
pub fn sup_distance<S: Scalar>(x: &GridFunction<S>, y: &GridFunction<S>) -> Result<S> {
    x.grid.check_same(&y.grid)?;
    Ok(x.values
        .iter()
        .zip(&y.values)
        .fold(S::zero(), |m, (&a, &b)| m.max((a - b).abs())))
}

/// Composite trapezoid rule over the whole interval.
pub fn integrate<S: Scalar>(x: &GridFunction<S>) -> Result<S> {
    let m = x.grid.size();
    if m < 2 {
        return Err(domain("integration needs at least two nodes"));
    }
    integrate_prefix(x, m - 1)
}

/// Composite trapezoid rule over `[a, t_k]`.
pub fn integrate_prefix<S: Scalar>(x: &GridFunction<S>, k: usize) -> Result<S> {
    let m = x.grid.size();
    if k >= m {
        return Err(Error::IndexOutOfRange { index: k, size: m });
    }
    if k == 0 {
        return Ok(S::zero());
    }
    let v = &x.values;
    let inner = v[1..k].iter().fold(S::zero(), |acc, &y| acc + y);
    let ends = (v[0] + v[k]) / S::lit(2.0);
    Ok(x.grid.step() * (inner + ends))
}

/// Closed ball `{y : ‖y − center‖∞ ≤ radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallRegion<S> {
    center: GridFunction<S>,
    radius: S,
}

impl<S: Scalar> BallRegion<S> {
    pub fn new(center: GridFunction<S>, radius: S) -> Result<Self> {
        if !(radius >= S::zero()) || !radius.is_finite() {
            return Err(domain(format!(
                "ball radius {radius} must be finite and nonnegative"
            )));
        }
        Ok(BallRegion { center, radius })
    }

    pub fn center(&self) -> &GridFunction<S> {
        &self.center
    }

    pub fn radius(&self) -> S {
        self.radius
    }

    pub fn grid(&self) -> &Grid<S> {
        self.center.grid()
    }

    pub fn contains(&self, x: &GridFunction<S>, rel_tol: S) -> Result<bool> {
        let d = sup_distance(&self.center, x)?;
        Ok(d <= self.radius * (S::one() + rel_tol) + S::min_positive_value())
    }

    pub fn with_radius(&self, radius: S) -> Result<Self> {
        Self::new(self.center.clone(), radius)
    }
}

/// Triangle wave in `[−1, 1]` with `teeth` full periods across the grid.
fn sawtooth<S: Scalar>(grid: &Grid<S>, teeth: usize) -> Vec<S> {
    let m = grid.size();
    if m == 1 {
        return vec![S::one()];
    }
    (0..m)
        .map(|i| {
            let phase = S::count(i * teeth) / S::count(m - 1);
            let frac = phase - phase.floor();
            let tri = if frac < S::lit(0.5) {
                S::lit(4.0) * frac - S::one()
            } else {
                S::lit(3.0) - S::lit(4.0) * frac
            };
            tri.max(-S::one()).min(S::one())
        })
        .collect()
}

/// Random piecewise-linear profile with values in `[−1, 1]`.
pub(crate) fn random_profile<S: Scalar>(grid: &Grid<S>, rng: &mut ChaCha8Rng) -> Vec<S> {
    let m = grid.size();
    if m == 1 {
        return vec![S::lit(rng.gen_range(-1.0..=1.0))];
    }
    let knots: usize = rng.gen_range(2..=9);
    let knot_values: Vec<f64> = (0..knots).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    (0..m)
        .map(|i| {
            let pos = i as f64 * (knots - 1) as f64 / (m - 1) as f64;
            let j = (pos.floor() as usize).min(knots - 2);
            let frac = pos - j as f64;
            let v = knot_values[j] + frac * (knot_values[j + 1] - knot_values[j]);
            S::lit(v.clamp(-1.0, 1.0))
        })
        .collect()
}

/// Deterministic sample of `count` functions from the ball.
///
/// The list opens with the structured extremes (center, center ± radius,
/// center ± radius·sawtooth) and continues with random piecewise-linear
/// perturbations drawn inside the ball.
pub fn sample_ball<S: Scalar>(
    region: &BallRegion<S>,
    count: usize,
    seed: u64,
) -> Vec<GridFunction<S>> {
    let grid = *region.grid();
    let c = region.center.values();
    let r = region.radius;
    let offset = |profile: &[S], sign: S| -> GridFunction<S> {
        GridFunction::from_raw(
            grid,
            c.iter()
                .zip(profile)
                .map(|(&ci, &p)| ci + sign * r * p)
                .collect(),
        )
    };
    let ones = vec![S::one(); grid.size()];
    let saw = sawtooth(&grid, 4);
    let mut out = Vec::with_capacity(count);
    let structured: [(&[S], S); 4] = [
        (&ones, S::one()),
        (&ones, -S::one()),
        (&saw, S::one()),
        (&saw, -S::one()),
    ];
    if count > 0 {
        out.push(region.center.clone());
    }
    for (profile, sign) in structured {
        if out.len() == count {
            break;
        }
        out.push(offset(profile, sign));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count {
        let p = random_profile(&grid, &mut rng);
        out.push(offset(&p, S::one()));
    }
    out
}
