//! Nyström single-layer discretization of the Dirichlet-to-Neumann operator
//! on planar analytic domains.
//!
//! A harmonic `u = Sφ` has interior Neumann trace `(½I + K')φ`, so Steklov
//! pairs solve `(½I + K')φ = σ Sφ`. The log kernel is integrated with Kress
//! product quadrature; `K'` is smooth on analytic curves.

mod eval;
mod grid;
mod layer;
mod solve;

use std::fmt::Write as _;

use serde_json::{json, Value};

pub use eval::{
    boundary_trace, evaluate_interior, BoundaryTrace, InteriorEvaluator, PointValue, Projection, MIN_FINE_SPACINGS,
    NEAR_SPACINGS, UPSAMPLE,
};
pub use grid::{build_nystrom_grid, build_nystrom_grid_with_scale, GridComponent, NystromGrid, CAPACITY_BAND, RESCALE};
pub use layer::{assemble_layer_operators, capacity_estimate, pivot_ratio, LayerMatrices};
pub use solve::{steklov_solve, steklov_solve_matrices, SteklovMode, SteklovSpectrum, IMAG_CUTOFF};

impl SteklovSpectrum {
    pub fn to_json(&self) -> Value {
        json!({
            "domain": self.grid.domain,
            "N": self.grid.n,
            "scale": self.grid.scale,
            "discarded": self.discarded,
            "eigs": self.modes.iter().map(|m| json!({"sigma": m.sigma, "residual": m.residual})).collect::<Vec<_>>(),
        })
    }

    /// `node,component,value` rows of one mode's density.
    pub fn density_csv(&self, mode: usize) -> Option<String> {
        let m = self.modes.get(mode)?;
        let mut out = String::from("node,component,value\n");
        for (i, v) in m.density.iter().enumerate() {
            let (c, _) = self.grid.locate(i);
            writeln!(out, "{i},{},{v:.17e}", self.grid.components[c].label).expect("write to string");
        }
        Some(out)
    }
}
