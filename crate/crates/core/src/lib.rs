//! Numerical laboratory for Steklov eigenfunctions on planar analytic domains.
//!
//! * [`geometry`]: Fourier-parametrized boundary curves, domains and Fermi charts.
//! * [`exact`]: closed-form eigenpairs on the disk, annulus and flat cylinder.
//! * [`dtn`]: Nyström single-layer discretization of the Dirichlet-to-Neumann map.
//! * [`envelope`]: decay envelopes `ψ_N`, Carleman weights and bracket certificates.
//! * [`verify`]: restriction norms on interior offset curves and bound margins.

pub mod dtn;
pub mod envelope;
mod error;
pub mod exact;
pub mod geometry;
pub mod verify;

pub use error::{Error, Result};
