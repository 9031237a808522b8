use std::f64::consts::{PI, TAU};

use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;

use super::grid::NystromGrid;
use crate::error::{Error, Result};
use crate::geometry::vec2::{dot, sub};

/// Single-layer and adjoint double-layer matrices on the working (dilated)
/// domain, with kernel `G(x, y) = −(1/2π) log|x − y|`.
///
/// Columns carry the quadrature weight, so `(S φ)_i ≈ ∫ G(x_i, y) φ(y) ds_y`
/// and the interior Neumann trace of `Sφ` is `(½I + K')φ`.
#[derive(Clone, Debug)]
pub struct LayerMatrices {
    pub s: Mat<f64>,
    pub kp: Mat<f64>,
    /// Working-domain trapezoid weights.
    pub weights: Vec<f64>,
    pub scale: f64,
}

impl LayerMatrices {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `½I + K'`.
    pub fn neumann(&self) -> Mat<f64> {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| self.kp[(i, j)] + if i == j { 0.5 } else { 0.0 })
    }
}

/// Kress weights `R_m`, `m = 0..2n`, for `∫ log(4 sin²((t−τ)/2)) f(τ) dτ`
/// with `t − τ = mπ/n`.
fn kress_weights(n: usize) -> Vec<f64> {
    let nf = n as f64;
    (0..2 * n)
        .map(|m| {
            let mut acc = 0.0;
            for k in 1..n {
                acc += (k as f64 * m as f64 * PI / nf).cos() / k as f64;
            }
            let alt = if m % 2 == 0 { 1.0 } else { -1.0 };
            -2.0 * PI / nf * acc - PI / (nf * nf) * alt
        })
        .collect()
}

pub fn assemble_layer_operators(grid: &NystromGrid) -> LayerMatrices {
    let lam = grid.scale;
    let n = grid.n;
    let total = grid.total_nodes();
    let h = TAU / n as f64;
    let kress = kress_weights(n / 2);

    struct Node {
        comp: usize,
        idx: usize,
        x: [f64; 2],
        nu: [f64; 2],
        speed: f64,
        kappa: f64,
    }
    let nodes: Vec<Node> = grid
        .components
        .iter()
        .enumerate()
        .flat_map(|(c, gc)| {
            (0..n).map(move |j| Node {
                comp: c,
                idx: j,
                x: [lam * gc.points[j][0], lam * gc.points[j][1]],
                nu: gc.normals[j],
                speed: lam * gc.speeds[j],
                kappa: gc.curvature[j] / lam,
            })
        })
        .collect();

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..total)
        .into_par_iter()
        .map(|i| {
            let xi = &nodes[i];
            let mut srow = vec![0.0; total];
            let mut krow = vec![0.0; total];
            for (j, yj) in nodes.iter().enumerate() {
                if i == j {
                    // log|x−y|² ≈ log(4 sin²) + log|c'|²
                    let m1 = -yj.speed / (4.0 * PI);
                    let m2 = -yj.speed * yj.speed.ln() / TAU;
                    srow[j] = kress[0] * m1 + h * m2;
                    krow[j] = -h * xi.kappa * xi.speed / (4.0 * PI);
                    continue;
                }
                let d = sub(xi.x, yj.x);
                let r2 = dot(d, d);
                krow[j] = -h * yj.speed * dot(d, xi.nu) / (TAU * r2);
                if xi.comp == yj.comp {
                    let m = xi.idx.abs_diff(yj.idx);
                    let half = (PI * (xi.idx as f64 - yj.idx as f64) / n as f64).sin();
                    let log4s2 = (4.0 * half * half).ln();
                    let m1 = -yj.speed / (4.0 * PI);
                    let m2 = -yj.speed * r2.ln() / (4.0 * PI) - m1 * log4s2;
                    srow[j] = kress[m] * m1 + h * m2;
                } else {
                    srow[j] = -h * yj.speed * r2.ln() / (4.0 * PI);
                }
            }
            (srow, krow)
        })
        .collect();

    let s = Mat::from_fn(total, total, |i, j| rows[i].0[j]);
    let kp = Mat::from_fn(total, total, |i, j| rows[i].1[j]);
    let weights = nodes.iter().map(|nd| h * nd.speed).collect();
    LayerMatrices { s, kp, weights, scale: lam }
}

/// Logarithmic capacity of the whole boundary from the equilibrium problem
/// `Sμ = V`, `∫μ = 1`; the capacity is `e^{−2πV}`.
pub fn capacity_estimate(grid: &NystromGrid) -> Result<f64> {
    let unit = grid.with_scale(1.0)?;
    let lm = assemble_layer_operators(&unit);
    let n = lm.dim();
    let a = Mat::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
        (true, true) => lm.s[(i, j)],
        (true, false) => -1.0,
        (false, true) => lm.weights[j],
        (false, false) => 0.0,
    });
    let mut rhs = Mat::<f64>::zeros(n + 1, 1);
    rhs[(n, 0)] = 1.0;
    let sol = a.partial_piv_lu().solve(&rhs);
    let v = sol[(n, 0)];
    if !v.is_finite() {
        return Err(Error::Conditioning("equilibrium system is singular".into()));
    }
    Ok((-TAU * v).exp())
}

/// Ratio of the smallest to the largest pivot magnitude of `S`.
pub fn pivot_ratio(s: &Mat<f64>) -> f64 {
    let lu = s.partial_piv_lu();
    let u = lu.U();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if max > 0.0 {
        min / max
    } else {
        0.0
    }
}

/// Weighted norm `(Σ w_i v_i²)^{1/2}`.
pub(crate) fn wnorm(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>().sqrt()
}
