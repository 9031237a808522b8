use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::Serialize;

use super::grid::NystromGrid;
use super::layer::{assemble_layer_operators, pivot_ratio, wnorm, LayerMatrices};
use crate::error::{Error, Result};

/// Eigenvalues with a larger imaginary part are discretization noise.
pub const IMAG_CUTOFF: f64 = 1e-8;
/// Relative gap below which eigenvalues share one orthonormalized cluster.
const CLUSTER_TOL: f64 = 1e-8;
/// Relative Ritz-value spread below which a cluster counts as degenerate.
const DEGENERATE_TOL: f64 = 1e-12;
/// `S` counts as singular below this pivot ratio.
const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

#[derive(Clone, Debug, Serialize)]
pub struct SteklovMode {
    pub sigma: f64,
    /// Relative residual `‖(½I+K')φ − σSφ‖ / ‖Sφ‖` in the boundary `L²` norm.
    pub residual: f64,
    /// Single-layer density on the working domain, global node order.
    #[serde(skip)]
    pub density: Vec<f64>,
    /// Boundary trace `Sφ`, normalized to unit `L²(∂Ω)` norm.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl SteklovMode {
    pub fn h(&self) -> Option<f64> {
        (self.sigma > 0.0).then(|| 1.0 / self.sigma)
    }
}

#[derive(Clone, Debug)]
pub struct SteklovSpectrum {
    pub grid: NystromGrid,
    pub modes: Vec<SteklovMode>,
    /// Eigenvalues dropped by the realness filter.
    pub discarded: usize,
}

impl SteklovSpectrum {
    pub fn sigmas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.sigma).collect()
    }
}

fn matvec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
        .collect()
}

fn weighted_dot(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), w)| w * x * y).sum()
}

/// Rayleigh–Ritz on a cluster whose traces are orthonormal: the DtN map,
/// self-adjoint on the boundary, restricted to their span. Ritz values come
/// back ascending with the rotated densities and traces; a restriction that
/// is scalar to roundoff keeps the basis and reports the mean.
fn rayleigh_ritz(basis: Vec<(Vec<f64>, Vec<f64>)>, a: &Mat<f64>, w: &[f64]) -> Result<Vec<(f64, Vec<f64>, Vec<f64>)>> {
    let k = basis.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let flux: Vec<Vec<f64>> = basis.iter().map(|(d, _)| matvec(a, d)).collect();
    let b = Mat::from_fn(k, k, |i, j| {
        0.5 * (weighted_dot(&basis[i].1, &flux[j], w) + weighted_dot(&basis[j].1, &flux[i], w))
    });
    let evd = b
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("cluster Rayleigh–Ritz failed: {e:?}")))?;
    let ritz: Vec<f64> = (0..k).map(|i| evd.S()[i]).collect();
    let mean = ritz.iter().sum::<f64>() / k as f64;
    if ritz[k - 1] - ritz[0] <= DEGENERATE_TOL * mean.abs().max(1.0) {
        return Ok(basis.into_iter().map(|(d, t)| (mean, d, t)).collect());
    }
    let u = evd.U();
    Ok((0..k)
        .map(|c| {
            let combine = |pick: fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<f64> {
                let mut out = vec![0.0; pick(&basis[0]).len()];
                for (j, v) in basis.iter().enumerate() {
                    out.iter_mut().zip(pick(v)).for_each(|(o, x)| *o += u[(j, c)] * x);
                }
                out
            };
            (ritz[c], combine(|v| &v.0), combine(|v| &v.1))
        })
        .collect())
}

/// Smallest `n_eigs` real eigenpairs of `(½I + K')φ = σ Sφ`.
pub fn steklov_solve(grid: &NystromGrid, n_eigs: usize) -> Result<SteklovSpectrum> {
    let lm = assemble_layer_operators(grid);
    steklov_solve_matrices(grid, &lm, n_eigs)
}

pub fn steklov_solve_matrices(grid: &NystromGrid, lm: &LayerMatrices, n_eigs: usize) -> Result<SteklovSpectrum> {
    let dim = lm.dim();
    if n_eigs == 0 || n_eigs > dim / 4 {
        return Err(Error::InvalidArgument(format!(
            "n_eigs must lie in 1..={} for {dim} nodes, got {n_eigs}",
            dim / 4
        )));
    }
    if pivot_ratio(&lm.s) < SINGULAR_PIVOT_RATIO {
        return Err(Error::Conditioning(format!(
            "single-layer matrix is numerically singular at scale {}",
            lm.scale
        )));
    }
    let a = lm.neumann();
    let m = lm.s.partial_piv_lu().solve(&a);
    let evd = m
        .eigen()
        .map_err(|e| Error::Eigensolver(format!("dense eigensolver failed: {e:?}")))?;
    let vals = evd.S();
    let vecs = evd.U();

    let mut candidates: Vec<(f64, usize)> = Vec::new();
    let mut discarded = 0;
    for i in 0..dim {
        let v = vals[i];
        if v.im.abs() > IMAG_CUTOFF * v.re.abs().max(1.0) {
            discarded += 1;
        } else {
            candidates.push((v.re, i));
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0));

    // real representatives of each eigenvector, phase-aligned on the largest entry
    let realify = |col: usize| -> [Vec<f64>; 2] {
        let mut best = (0.0f64, 0usize);
        for r in 0..dim {
            let z = vecs[(r, col)];
            let m2 = z.re * z.re + z.im * z.im;
            if m2 > best.0 {
                best = (m2, r);
            }
        }
        let p = vecs[(best.1, col)];
        let pn = best.0.sqrt();
        let (cr, ci) = (p.re / pn, -p.im / pn);
        let mut re = vec![0.0; dim];
        let mut im = vec![0.0; dim];
        for r in 0..dim {
            let z = vecs[(r, col)];
            re[r] = z.re * cr - z.im * ci;
            im[r] = z.re * ci + z.im * cr;
        }
        [re, im]
    };

    let w = &lm.weights;
    let inner = |a: &[f64], b: &[f64]| weighted_dot(a, b, w);

    let mut modes: Vec<SteklovMode> = Vec::new();
    let mut start = 0;
    while start < candidates.len() && modes.len() < n_eigs {
        let base = candidates[start].0;
        let mut end = start + 1;
        while end < candidates.len() && (candidates[end].0 - base).abs() <= CLUSTER_TOL * base.abs().max(1.0) {
            end += 1;
        }
        let size = end - start;

        // pivoted Gram–Schmidt on traces over all real candidates of the cluster
        let mut pool: Vec<(Vec<f64>, Vec<f64>)> = candidates[start..end]
            .iter()
            .flat_map(|&(_, col)| realify(col))
            .map(|d| {
                let t = matvec(&lm.s, &d);
                (d, t)
            })
            .collect();
        let mut basis: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        while basis.len() < size && !pool.is_empty() {
            let (k, _) = pool
                .iter()
                .enumerate()
                .map(|(k, (_, t))| (k, inner(t, t)))
                .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            let (mut d, mut t) = pool.swap_remove(k);
            let nrm = inner(&t, &t).sqrt();
            if nrm == 0.0 {
                break;
            }
            d.iter_mut().for_each(|x| *x /= nrm);
            t.iter_mut().for_each(|x| *x /= nrm);
            for (pd, pt) in pool.iter_mut() {
                let c = inner(pt, &t);
                pd.iter_mut().zip(&d).for_each(|(x, y)| *x -= c * y);
                pt.iter_mut().zip(&t).for_each(|(x, y)| *x -= c * y);
            }
            basis.push((d, t));
        }

        let ritz = if size == 1 {
            basis.into_iter().map(|(d, t)| (candidates[start].0, d, t)).collect()
        } else {
            rayleigh_ritz(basis, &a, w)?
        };
        for (sigma_w, mut d, mut t) in ritz {
            // largest trace entry positive
            let imax = (0..dim).fold(0, |b, r| if t[r].abs() > t[b].abs() { r } else { b });
            if t[imax] < 0.0 {
                d.iter_mut().for_each(|x| *x = -*x);
                t.iter_mut().for_each(|x| *x = -*x);
            }
            let ad = matvec(&a, &d);
            let res: Vec<f64> = ad.iter().zip(&t).map(|(x, y)| x - sigma_w * y).collect();
            let residual = wnorm(&res, w) / wnorm(&t, w);
            // physical weights differ from working ones by the constant scale
            let norm_phys = wnorm(&t, w) / lm.scale.sqrt();
            d.iter_mut().for_each(|x| *x /= norm_phys);
            t.iter_mut().for_each(|x| *x /= norm_phys);
            modes.push(SteklovMode {
                // roundoff can push the constant mode a hair below zero
                sigma: if sigma_w.abs() < 1e-12 { sigma_w.abs() * lm.scale } else { sigma_w * lm.scale },
                residual,
                density: d,
                trace: t,
            });
        }
        start = end;
    }
    modes.truncate(n_eigs);
    if modes.len() < n_eigs {
        return Err(Error::Eigensolver(format!(
            "only {} real eigenvalues survived the realness filter",
            modes.len()
        )));
    }
    Ok(SteklovSpectrum {
        grid: grid.clone(),
        modes,
        discarded,
    })
}
