use std::f64::consts::TAU;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Domain, ParamCurve, Vec2};

/// Equispaced nodes on one boundary component, in physical coordinates.
#[derive(Clone, Debug, Serialize)]
pub struct GridComponent {
    pub label: String,
    /// Global index of this component's first node.
    pub offset: usize,
    pub params: Vec<f64>,
    pub points: Vec<Vec2>,
    pub normals: Vec<Vec2>,
    pub speeds: Vec<f64>,
    pub curvature: Vec<f64>,
    #[serde(skip)]
    pub curve: ParamCurve,
}

impl GridComponent {
    fn sample(curve: &ParamCurve, n: usize, offset: usize) -> Self {
        let params: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
        Self {
            label: curve.label.clone(),
            offset,
            points: params.iter().map(|&s| curve.point(s)).collect(),
            normals: params.iter().map(|&s| curve.outward_normal(s)).collect(),
            speeds: params.iter().map(|&s| curve.speed(s)).collect(),
            curvature: params.iter().map(|&s| curve.curvature(s)).collect(),
            params,
            curve: curve.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

/// Nyström discretization of `∂Ω`: `n` nodes per component.
///
/// Geometry is stored in physical units. Layer operators are assembled on
/// the domain dilated by `scale`, which only matters for the logarithmic
/// kernel; physical eigenvalues are the working ones times `scale`.
#[derive(Clone, Debug, Serialize)]
pub struct NystromGrid {
    pub n: usize,
    pub scale: f64,
    pub components: Vec<GridComponent>,
    #[serde(skip)]
    pub domain: Domain,
}

impl NystromGrid {
    pub fn total_nodes(&self) -> usize {
        self.n * self.components.len()
    }

    /// Trapezoid weights `(2π/n)|c'(s_j)|` in physical units, global order.
    pub fn weights(&self) -> Vec<f64> {
        let h = TAU / self.n as f64;
        self.components
            .iter()
            .flat_map(|c| c.speeds.iter().map(move |s| s * h))
            .collect()
    }

    /// `(component, local index)` of a global node.
    pub fn locate(&self, node: usize) -> (usize, usize) {
        (node / self.n, node % self.n)
    }

    pub fn boundary_length(&self) -> f64 {
        self.weights().iter().sum()
    }

    /// Same nodes with a different working dilation.
    pub fn with_scale(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
        }
        Ok(Self { scale, ..self.clone() })
    }
}

/// Samples `n` nodes per component and picks the working dilation from the
/// estimated logarithmic capacity.
pub fn build_nystrom_grid(domain: &Domain, n: usize) -> Result<NystromGrid> {
    let grid = build_nystrom_grid_with_scale(domain, n, 1.0)?;
    let cap = super::layer::capacity_estimate(&grid)?;
    if (cap - 1.0).abs() < CAPACITY_BAND {
        grid.with_scale(RESCALE)
    } else {
        Ok(grid)
    }
}

/// Capacities closer to 1 than this trigger the rescale.
pub const CAPACITY_BAND: f64 = 0.1;
pub const RESCALE: f64 = 2.0;

pub fn build_nystrom_grid_with_scale(domain: &Domain, n: usize, scale: f64) -> Result<NystromGrid> {
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("node count must be even, got {n}")));
    }
    if n < 16 {
        return Err(Error::InvalidArgument(format!("node count must be at least 16, got {n}")));
    }
    let components = domain
        .components()
        .iter()
        .enumerate()
        .map(|(i, c)| GridComponent::sample(c, n, i * n))
        .collect();
    NystromGrid {
        n,
        scale: 1.0,
        components,
        domain: domain.clone(),
    }
    .with_scale(scale)
}
