//! Concrete fixed-point operators on grid functions and the machinery that
//! turns their model data into a certified [`DataPacket`].

pub mod diagnostics;
pub mod expr;
pub mod kernel;
pub mod nonlinearity;
pub mod packet;

pub use diagnostics::{
    gauge_dominance_check, order_interval_check, proinov_control, ControlMode, DominanceReport,
    OrderIntervalReport, OrderIntervalVerdict, OrderPrecondition,
};
pub use expr::{Bindings, Expr, Var};
pub use kernel::{
    dirichlet_green, dirichlet_green_value, kernel_bound_h, kernel_bound_v, linear_interpolant,
    DiscreteKernel, Kernel, KernelTable, Profile, SeparableTerm,
};
pub use nonlinearity::{LatticeEvidence, NonlinearRule, Nonlinearity};
pub use packet::{
    build_packet, build_packet_with, invariant_radius, ChecklistEntry, ChecklistFailure,
    ChecklistItem, DataPacket, PacketConstants, PacketOptions, Verdict,
};

use crate::error::{domain, Error, Result};
use crate::funcspace::{Grid, GridFunction};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `g(t) + ∫_a^b K(t,s) f(s, x(s)) ds`
    Hammerstein,
    /// `g(t) + ∫_a^t K(t,s) f(s, x(s)) ds`
    Volterra,
    /// `ℓ(t) + ∫_a^b G(t,s) F(s, x(s)) ds`
    Green,
    /// `κ·x + ε` on the real line.
    AffineScalar,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Hammerstein => "hammerstein",
            OperatorKind::Volterra => "volterra",
            OperatorKind::Green => "green",
            OperatorKind::AffineScalar => "affine",
        }
    }
}

/// Data of an integral operator together with its grid discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralModel<S> {
    pub forcing: Profile<S>,
    pub kernel: Kernel<S>,
    pub nonlinearity: Nonlinearity<S>,
}

#[derive(Debug, Clone, PartialEq)]
enum Body<S> {
    Integral {
        model: IntegralModel<S>,
        forcing: GridFunction<S>,
        kernel: DiscreteKernel<S>,
    },
    Affine {
        slope: S,
        offset: S,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointOperator<S> {
    kind: OperatorKind,
    grid: Grid<S>,
    body: Body<S>,
}

impl<S: Scalar> FixedPointOperator<S> {
    fn integral(kind: OperatorKind, grid: Grid<S>, model: IntegralModel<S>) -> Result<Self> {
        if grid.size() < 2 {
            return Err(domain("integral operators need at least two grid nodes"));
        }
        let forcing = model.forcing.sample(grid)?;
        let kernel = model.kernel.discretize(grid)?;
        Ok(FixedPointOperator {
            kind,
            grid,
            body: Body::Integral {
                model,
                forcing,
                kernel,
            },
        })
    }

    pub fn hammerstein(
        grid: Grid<S>,
        forcing: Profile<S>,
        kernel: Kernel<S>,
        nonlinearity: Nonlinearity<S>,
    ) -> Result<Self> {
        Self::integral(
            OperatorKind::Hammerstein,
            grid,
            IntegralModel {
                forcing,
                kernel,
                nonlinearity,
            },
        )
    }

    pub fn volterra(
        grid: Grid<S>,
        forcing: Profile<S>,
        kernel: Kernel<S>,
        nonlinearity: Nonlinearity<S>,
    ) -> Result<Self> {
        Self::integral(
            OperatorKind::Volterra,
            grid,
            IntegralModel {
                forcing,
                kernel,
                nonlinearity,
            },
        )
    }

    /// Green operator with an explicit forcing `ℓ` and kernel `G`.
    pub fn green(
        grid: Grid<S>,
        forcing: Profile<S>,
        kernel: Kernel<S>,
        nonlinearity: Nonlinearity<S>,
    ) -> Result<Self> {
        Self::integral(
            OperatorKind::Green,
            grid,
            IntegralModel {
                forcing,
                kernel,
                nonlinearity,
            },
        )
    }

    /// Fixed-point form of `x'' = F(t, x)`, `x(a) = alpha`, `x(b) = beta`.
    pub fn dirichlet(
        grid: Grid<S>,
        alpha: S,
        beta: S,
        nonlinearity: Nonlinearity<S>,
    ) -> Result<Self> {
        let ell = linear_interpolant(alpha, beta, grid)?;
        Self::green(
            grid,
            Profile::Samples(ell),
            dirichlet_green(grid.interval()),
            nonlinearity,
        )
    }

    pub fn affine_scalar(slope: S, offset: S) -> Result<Self> {
        if !(slope.is_finite() && offset.is_finite()) {
            return Err(domain("affine map coefficients must be finite"));
        }
        Ok(FixedPointOperator {
            kind: OperatorKind::AffineScalar,
            grid: Grid::scalar(),
            body: Body::Affine { slope, offset },
        })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn grid(&self) -> &Grid<S> {
        &self.grid
    }

    pub fn model(&self) -> Option<&IntegralModel<S>> {
        match &self.body {
            Body::Integral { model, .. } => Some(model),
            Body::Affine { .. } => None,
        }
    }

    pub fn discrete_kernel(&self) -> Option<&DiscreteKernel<S>> {
        match &self.body {
            Body::Integral { kernel, .. } => Some(kernel),
            Body::Affine { .. } => None,
        }
    }

    /// Forcing term sampled on the grid (`ε` as a constant for affine maps).
    pub fn forcing(&self) -> GridFunction<S> {
        match &self.body {
            Body::Integral { forcing, .. } => forcing.clone(),
            Body::Affine { offset, .. } => GridFunction::constant(self.grid, *offset),
        }
    }

    pub fn affine_coefficients(&self) -> Option<(S, S)> {
        match &self.body {
            Body::Affine { slope, offset } => Some((*slope, *offset)),
            Body::Integral { .. } => None,
        }
    }

    /// Kernel bound matching the operator form: full-interval for Hammerstein
    /// and Green operators, prefix for Volterra, `1` for affine maps.
    pub fn kernel_bound(&self) -> S {
        match &self.body {
            Body::Integral { kernel, .. } => match self.kind {
                OperatorKind::Volterra => kernel.bound_prefix(&self.grid),
                _ => kernel.bound_full(&self.grid),
            },
            Body::Affine { .. } => S::one(),
        }
    }

    /// Declared Lipschitz constant of the nonlinearity (`|κ|` for affine maps).
    pub fn nonlinearity_lip(&self) -> S {
        match &self.body {
            Body::Integral { model, .. } => model.nonlinearity.lip(),
            Body::Affine { slope, .. } => slope.abs(),
        }
    }

    /// `sup_s |f(s, 0)|` as declared (zero for affine maps).
    pub fn zero_bound(&self) -> S {
        match &self.body {
            Body::Integral { model, .. } => model.nonlinearity.zero_bound(),
            Body::Affine { .. } => S::zero(),
        }
    }

    /// Lipschitz bound `L = L_f · M` of the discretized operator.
    pub fn lipschitz_bound(&self) -> S {
        self.nonlinearity_lip() * self.kernel_bound()
    }

    pub fn apply(&self, x: &GridFunction<S>) -> Result<GridFunction<S>> {
        self.grid.check_same(x.grid())?;
        let values = match &self.body {
            Body::Affine { slope, offset } => {
                x.values().iter().map(|&v| *slope * v + *offset).collect()
            }
            Body::Integral {
                model,
                forcing,
                kernel,
            } => {
                let fx = model.nonlinearity.apply_grid(x)?;
                let integral = match self.kind {
                    OperatorKind::Volterra => kernel.integrate_prefix(&self.grid, &fx),
                    _ => kernel.integrate_full(&self.grid, &fx),
                };
                forcing
                    .values()
                    .iter()
                    .zip(integral)
                    .map(|(&g, k)| g + k)
                    .collect::<Vec<S>>()
            }
        };
        if values.iter().any(|v: &S| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{} operator", self.kind.name())));
        }
        Ok(GridFunction::from_raw(self.grid, values))
    }

    /// The same model rediscretized on a grid of `size` nodes.
    pub fn on_grid(&self, size: usize) -> Result<Self> {
        match &self.body {
            Body::Affine { .. } => Ok(self.clone()),
            Body::Integral { model, .. } => {
                let grid = Grid::new(self.grid.interval(), size)?;
                Self::integral(self.kind, grid, model.clone())
            }
        }
    }

    /// Richardson-style quadrature defect at `x`: the sup-distance between
    /// `T x` on this grid and `T x` computed on the refined `2m − 1` grid,
    /// compared at the shared nodes.
    pub fn quadrature_defect(&self, x: &GridFunction<S>) -> Result<S> {
        if self.kind == OperatorKind::AffineScalar {
            return Ok(S::zero());
        }
        let fine_op = self.on_grid(self.grid.refined().size())?;
        let fine_x = x.resample(*fine_op.grid())?;
        let coarse = self.apply(x)?;
        let fine = fine_op.apply(&fine_x)?.coarsen()?;
        crate::funcspace::sup_distance(&coarse, &fine)
    }
}
