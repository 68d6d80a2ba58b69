//! Narrow escape through thin necks: mean first passage time by asymptotic
//! expansion, by a boundary integral solve of the Neumann–Robin model, and by
//! Monte Carlo simulation of the composite head + neck domain.
//!
//! Everything is generic over the scalar type (`f32` or `f64`); the aliases at
//! the crate root fix it to `f64`, which is what the solvers are tuned for.

pub mod asymptotics;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod montecarlo;
pub mod neumann;
pub mod quadrature;
pub mod robin_bie;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Point, Real};

pub type PointF64 = scalar::Point<f64>;
pub type HeadDomainF64 = geometry::HeadDomain<f64>;
pub type NeckSpecF64 = geometry::NeckSpec<f64>;
pub type ProblemSpecF64 = geometry::ProblemSpec<f64>;
pub type ProblemSpecF32 = geometry::ProblemSpec<f32>;
pub type NeumannKernelF64 = neumann::NeumannKernel<f64>;
pub type AsymptoticSolutionF64 = asymptotics::AsymptoticSolution<f64>;
pub type RobinSolutionF64 = robin_bie::RobinSolution<f64>;
pub type BoundaryDensityF64 = robin_bie::BoundaryDensity<f64>;
