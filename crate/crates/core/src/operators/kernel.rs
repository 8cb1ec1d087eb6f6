//! Integral kernels, their grid discretizations and the kernel bounds
//! `sup_t ∫_a^b |K(t,s)| ds` and `sup_t ∫_a^t |K(t,s)| ds`.

use crate::error::{Error, Result};
use crate::funcspace::{Grid, GridFunction, Interval};
use crate::operators::expr::{Bindings, Expr, Var};
use crate::scalar::Scalar;

/// A function of one variable, given by formula or by samples.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile<S> {
    /// Formula in `t` (or `s`; both identifiers are bound to the argument).
    Expr(Expr),
    Samples(GridFunction<S>),
}

impl<S: Scalar> Profile<S> {
    pub fn parse(src: &str) -> Result<Self> {
        Ok(Profile::Expr(Expr::parse(src, &[Var::T, Var::S])?))
    }

    pub fn eval(&self, x: S) -> Result<S> {
        match self {
            Profile::Expr(e) => e.eval(&Bindings {
                t: x,
                s: x,
                u: S::zero(),
            }),
            Profile::Samples(f) => Ok(f.interpolate(x)),
        }
    }

    pub fn sample(&self, grid: Grid<S>) -> Result<GridFunction<S>> {
        match self {
            Profile::Samples(f) => f.resample(grid),
            Profile::Expr(_) => {
                let values = grid
                    .nodes()
                    .map(|t| self.eval(t))
                    .collect::<Result<Vec<_>>>()?;
                GridFunction::new(grid, values)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparableTerm<S> {
    pub t_factor: Profile<S>,
    pub s_factor: Profile<S>,
}

/// Kernel values `K(t_i, s_j)` on a square grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable<S> {
    grid: Grid<S>,
    values: Vec<S>,
}

impl<S: Scalar> KernelTable<S> {
    pub fn new(grid: Grid<S>, values: Vec<S>) -> Result<Self> {
        let m = grid.size();
        if values.len() != m * m {
            return Err(Error::GridMismatch(format!(
                "kernel table has {} entries, expected {m}×{m}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel table".to_string()));
        }
        Ok(KernelTable { grid, values })
    }

    pub fn from_rows(grid: Grid<S>, rows: &[Vec<S>]) -> Result<Self> {
        Self::new(grid, rows.iter().flatten().copied().collect())
    }

    pub fn grid(&self) -> &Grid<S> {
        &self.grid
    }

    fn at(&self, i: usize, j: usize) -> S {
        self.values[i * self.grid.size() + j]
    }

    /// Bilinear interpolation.
    fn eval(&self, t: S, s: S) -> S {
        let m = self.grid.size();
        if m == 1 {
            return self.values[0];
        }
        let a = self.grid.interval().a();
        let h = self.grid.step();
        let locate = |x: S| {
            let pos = ((x - a) / h).max(S::zero());
            let i = pos.floor().to_usize().unwrap_or(0).min(m - 2);
            (i, (pos - S::count(i)).min(S::one()))
        };
        let (i, fi) = locate(t);
        let (j, fj) = locate(s);
        let one = S::one();
        (one - fi) * (one - fj) * self.at(i, j)
            + (one - fi) * fj * self.at(i, j + 1)
            + fi * (one - fj) * self.at(i + 1, j)
            + fi * fj * self.at(i + 1, j + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel<S> {
    /// `K(t,s) = Σ_k φ_k(t)·ψ_k(s)`.
    Separable(Vec<SeparableTerm<S>>),
    Tabulated(KernelTable<S>),
    /// Formula in `t` and `s`.
    Expression(Expr),
    /// Kernel `G` with `x'' = F, x(a) = x(b) = 0 ⇔ x = ∫ G(·,s) F(s) ds`.
    DirichletGreen(Interval<S>),
}

/// `G(t,s)` solving `x'' = F` with homogeneous Dirichlet conditions on `[a,b]`.
pub fn dirichlet_green_value<S: Scalar>(interval: &Interval<S>, t: S, s: S) -> S {
    let (a, b) = (interval.a(), interval.b());
    let len = b - a;
    if s <= t {
        -(b - t) * (s - a) / len
    } else {
        -(t - a) * (b - s) / len
    }
}

/// The Dirichlet Green kernel on `interval`.
pub fn dirichlet_green<S: Scalar>(interval: Interval<S>) -> Kernel<S> {
    Kernel::DirichletGreen(interval)
}

/// Affine `ℓ` with `ℓ(a) = alpha` and `ℓ(b) = beta`.
pub fn linear_interpolant<S: Scalar>(alpha: S, beta: S, grid: Grid<S>) -> Result<GridFunction<S>> {
    let iv = grid.interval();
    GridFunction::from_fn(grid, |t| {
        alpha + (t - iv.a()) / iv.length() * (beta - alpha)
    })
}

impl<S: Scalar> Kernel<S> {
    pub fn parse_expression(src: &str) -> Result<Self> {
        Ok(Kernel::Expression(Expr::parse(src, &[Var::T, Var::S])?))
    }

    pub fn separable_from_strings(terms: &[(&str, &str)]) -> Result<Self> {
        let terms = terms
            .iter()
            .map(|(phi, psi)| {
                Ok(SeparableTerm {
                    t_factor: Profile::parse(phi)?,
                    s_factor: Profile::parse(psi)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Kernel::Separable(terms))
    }

    pub fn eval(&self, t: S, s: S) -> Result<S> {
        match self {
            Kernel::Separable(terms) => terms.iter().try_fold(S::zero(), |acc, term| {
                Ok(acc + term.t_factor.eval(t)? * term.s_factor.eval(s)?)
            }),
            Kernel::Tabulated(table) => Ok(table.eval(t, s)),
            Kernel::Expression(e) => e.eval(&Bindings::ts(t, s)),
            Kernel::DirichletGreen(iv) => Ok(dirichlet_green_value(iv, t, s)),
        }
    }

    pub fn discretize(&self, grid: Grid<S>) -> Result<DiscreteKernel<S>> {
        let m = grid.size();
        let nodes: Vec<S> = grid.nodes().collect();
        let dk = match self {
            Kernel::Separable(terms) => {
                let mut t_factors = Vec::with_capacity(terms.len());
                let mut s_factors = Vec::with_capacity(terms.len());
                for term in terms {
                    t_factors.push(term.t_factor.sample(grid)?.into_values());
                    s_factors.push(term.s_factor.sample(grid)?.into_values());
                }
                DiscreteKernel::LowRank {
                    size: m,
                    t_factors,
                    s_factors,
                }
            }
            Kernel::Tabulated(table) if *table.grid() == grid => DiscreteKernel::Dense {
                size: m,
                values: table.values.clone(),
            },
            Kernel::DirichletGreen(iv) if *iv != grid.interval() => {
                return Err(Error::GridMismatch(
                    "Green kernel interval differs from the operator grid".to_string(),
                ))
            }
            _ => {
                let mut values = Vec::with_capacity(m * m);
                for &t in &nodes {
                    for &s in &nodes {
                        values.push(self.eval(t, s)?);
                    }
                }
                DiscreteKernel::Dense { size: m, values }
            }
        };
        if !dk.is_finite() {
            return Err(Error::NonFinite("kernel".to_string()));
        }
        Ok(dk)
    }
}

/// Kernel values at grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscreteKernel<S> {
    LowRank {
        size: usize,
        t_factors: Vec<Vec<S>>,
        s_factors: Vec<Vec<S>>,
    },
    Dense {
        size: usize,
        values: Vec<S>,
    },
}

impl<S: Scalar> DiscreteKernel<S> {
    pub fn size(&self) -> usize {
        match self {
            DiscreteKernel::LowRank { size, .. } | DiscreteKernel::Dense { size, .. } => *size,
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            DiscreteKernel::LowRank {
                t_factors,
                s_factors,
                ..
            } => t_factors
                .iter()
                .chain(s_factors)
                .all(|v| v.iter().all(|x| x.is_finite())),
            DiscreteKernel::Dense { values, .. } => values.iter().all(|x| x.is_finite()),
        }
    }

    pub fn at(&self, i: usize, j: usize) -> S {
        match self {
            DiscreteKernel::LowRank {
                t_factors,
                s_factors,
                ..
            } => t_factors
                .iter()
                .zip(s_factors)
                .fold(S::zero(), |acc, (phi, psi)| acc + phi[i] * psi[j]),
            DiscreteKernel::Dense { size, values } => values[i * size + j],
        }
    }

    pub fn row(&self, i: usize) -> Vec<S> {
        match self {
            DiscreteKernel::Dense { size, values } => values[i * size..(i + 1) * size].to_vec(),
            DiscreteKernel::LowRank { size, .. } => (0..*size).map(|j| self.at(i, j)).collect(),
        }
    }

    /// Trapezoid image over the full interval: `∫_a^b K(t_i, s) v(s) ds`.
    pub fn integrate_full(&self, grid: &Grid<S>, v: &[S]) -> Vec<S> {
        let m = grid.size();
        let w = grid.trapezoid_weights(m.saturating_sub(1));
        match self {
            DiscreteKernel::LowRank {
                t_factors,
                s_factors,
                ..
            } => {
                let coeffs: Vec<S> = s_factors
                    .iter()
                    .map(|psi| {
                        psi.iter()
                            .zip(v)
                            .zip(&w)
                            .fold(S::zero(), |acc, ((&p, &x), &wj)| acc + wj * p * x)
                    })
                    .collect();
                (0..m)
                    .map(|i| {
                        t_factors
                            .iter()
                            .zip(&coeffs)
                            .fold(S::zero(), |acc, (phi, &c)| acc + phi[i] * c)
                    })
                    .collect()
            }
            DiscreteKernel::Dense { values, .. } => (0..m)
                .map(|i| {
                    let row = &values[i * m..(i + 1) * m];
                    row.iter()
                        .zip(v)
                        .zip(&w)
                        .fold(S::zero(), |acc, ((&k, &x), &wj)| acc + wj * k * x)
                })
                .collect(),
        }
    }

    /// Trapezoid image over `[a, t_i]`: `∫_a^{t_i} K(t_i, s) v(s) ds`.
    pub fn integrate_prefix(&self, grid: &Grid<S>, v: &[S]) -> Vec<S> {
        let m = grid.size();
        let h = grid.step();
        let half = h / S::lit(2.0);
        match self {
            DiscreteKernel::LowRank {
                t_factors,
                s_factors,
                ..
            } => {
                // cumulative trapezoid of ψ_k·v per term
                let cumulative: Vec<Vec<S>> = s_factors
                    .iter()
                    .map(|psi| {
                        let mut acc = vec![S::zero(); m];
                        for i in 1..m {
                            let left = psi[i - 1] * v[i - 1];
                            let right = psi[i] * v[i];
                            acc[i] = acc[i - 1] + half * (left + right);
                        }
                        acc
                    })
                    .collect();
                (0..m)
                    .map(|i| {
                        t_factors
                            .iter()
                            .zip(&cumulative)
                            .fold(S::zero(), |acc, (phi, c)| acc + phi[i] * c[i])
                    })
                    .collect()
            }
            DiscreteKernel::Dense { values, .. } => (0..m)
                .map(|i| {
                    if i == 0 {
                        return S::zero();
                    }
                    let row = &values[i * m..i * m + i + 1];
                    let inner = (1..i).fold(S::zero(), |acc, j| acc + row[j] * v[j]);
                    h * inner + half * (row[0] * v[0] + row[i] * v[i])
                })
                .collect(),
        }
    }

    /// `max_i Σ_j w_j |K(t_i, s_j)|` over the full interval.
    pub fn bound_full(&self, grid: &Grid<S>) -> S {
        let m = grid.size();
        let w = grid.trapezoid_weights(m.saturating_sub(1));
        (0..m)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(&w)
                    .fold(S::zero(), |acc, (&k, &wj)| acc + wj * k.abs())
            })
            .fold(S::zero(), S::max)
    }

    /// `max_i Σ_{j≤i} w^{(i)}_j |K(t_i, s_j)|` over prefix intervals.
    pub fn bound_prefix(&self, grid: &Grid<S>) -> S {
        let m = grid.size();
        (1..m)
            .map(|i| {
                let w = grid.trapezoid_weights(i);
                self.row(i)[..=i]
                    .iter()
                    .zip(&w)
                    .fold(S::zero(), |acc, (&k, &wj)| acc + wj * k.abs())
            })
            .fold(S::zero(), S::max)
    }

    /// Kernel whose entries are `self − other`.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.size() != other.size() {
            return Err(Error::GridMismatch(
                "kernels on different grids".to_string(),
            ));
        }
        let m = self.size();
        let mut values = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                values.push(self.at(i, j) - other.at(i, j));
            }
        }
        Ok(DiscreteKernel::Dense { size: m, values })
    }
}

/// `sup_t ∫_a^b |K(t,s)| ds` by trapezoid on `grid`.
pub fn kernel_bound_h<S: Scalar>(kernel: &Kernel<S>, grid: Grid<S>) -> Result<S> {
    Ok(kernel.discretize(grid)?.bound_full(&grid))
}

/// `sup_t ∫_a^t |K(t,s)| ds` by trapezoid on `grid`.
pub fn kernel_bound_v<S: Scalar>(kernel: &Kernel<S>, grid: Grid<S>) -> Result<S> {
    Ok(kernel.discretize(grid)?.bound_prefix(&grid))
}
