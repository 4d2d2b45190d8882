//! A reaction-diffusion laboratory for the SIR epidemic model with constant
//! birth and death rates.
//!
//! ```text
//! ∂t S = χS ∇²S + b − βSI − νS
//! ∂t I = χI ∇²I + βSI − (γ+ν)I
//! ∂t R = χR ∇²R + γI − νR
//! ```
//!
//! on the square `(0, L)²` with no-flux boundaries. The crate is split by
//! concern:
//!
//! * [`kinetics`]: pointwise reaction terms, Jacobian, equilibria and the
//!   invariant-region box.
//! * [`grid`]: cell-centered grids, the Neumann 5-point Laplacian, midpoint
//!   quadrature and discrete norms.
//! * [`integrator`]: method-of-lines RK4 time stepping, trajectories and
//!   relaxation to steady state.
//! * [`spectral`]: the closed-form cosine-series solution of the
//!   infection-free (β = 0) system.
//! * [`stability`]: dispersion matrices `J − k²D`, eigenvalues, critical
//!   wavenumbers and Turing classification.
//! * [`experiments`]: pass/fail verification experiments with explicit
//!   tolerances.
//! * [`output`]: CSV and JSON renderings of fields, series and reports.

pub mod error;
pub mod experiments;
pub mod grid;
pub mod integrator;
pub mod kinetics;
pub mod output;
pub mod spectral;
pub mod stability;

pub use error::{Error, Result};
pub use grid::{Field, Grid, NormKind};
pub use integrator::{InitSpec, SimConfig, State, Trajectory};
pub use kinetics::{EquilibriumSet, InvariantRegionBounds, Params, SirPoint};
