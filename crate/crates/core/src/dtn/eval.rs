use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use super::grid::NystromGrid;
use super::layer::{assemble_layer_operators, wnorm};
use super::solve::SteklovSpectrum;
use crate::error::{Error, Result};
use crate::geometry::polyline::winding_number;
use crate::geometry::vec2::{dist, dot, sub, Vec2};

/// Density upsampling factor near the boundary.
pub const UPSAMPLE: usize = 8;
/// Upsample a component when the point is closer than this many node spacings.
pub const NEAR_SPACINGS: f64 = 5.0;
/// Refuse points closer than this many upsampled spacings.
pub const MIN_FINE_SPACINGS: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointValue {
    pub value: f64,
    pub gradient: [f64; 2],
}

/// Nearest boundary point of one component.
#[derive(Clone, Copy, Debug)]
pub struct Projection {
    pub component: usize,
    pub s: f64,
    pub distance: f64,
    /// `(p − c(s))·ν(s)`; negative inside the domain.
    pub signed: f64,
}

struct Quadrature {
    /// Working-domain points.
    points: Vec<Vec2>,
    /// Working-domain weights `(2π/m) λ|c'|`.
    weights: Vec<f64>,
    /// `densities[mode][node]`.
    densities: Vec<Vec<f64>>,
}

struct ComponentData {
    coarse: Quadrature,
    fine: Quadrature,
    /// Physical polyline at the fine resolution, for containment tests.
    polyline: Vec<Vec2>,
    /// Unnormalized DFT of each mode's boundary trace.
    trace_dft: Vec<Vec<Complex64>>,
}

/// Batched evaluation of several single-layer potentials `u = Sφ` inside
/// the domain and on its boundary, in physical coordinates.
pub struct InteriorEvaluator {
    grid: NystromGrid,
    sigmas: Vec<f64>,
    comps: Vec<ComponentData>,
}

fn fourier_upsample(values: &[f64], factor: usize, planner: &mut FftPlanner<f64>) -> Vec<f64> {
    let n = values.len();
    let m = n * factor;
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let mut pad = vec![Complex64::new(0.0, 0.0); m];
    let half = n / 2;
    pad[..half].copy_from_slice(&buf[..half]);
    for k in half + 1..n {
        pad[m - (n - k)] = buf[k];
    }
    // split the Nyquist coefficient so the interpolant stays real
    pad[half] = buf[half] * 0.5;
    pad[m - half] += buf[half] * 0.5;
    planner.plan_fft_inverse(m).process(&mut pad);
    pad.iter().map(|z| z.re / n as f64).collect()
}

impl InteriorEvaluator {
    pub fn from_spectrum(spectrum: &SteklovSpectrum, modes: &[usize]) -> Result<Self> {
        let mut densities = Vec::with_capacity(modes.len());
        let mut sigmas = Vec::with_capacity(modes.len());
        for &m in modes {
            let mode = spectrum
                .modes
                .get(m)
                .ok_or_else(|| Error::InvalidArgument(format!("mode {m} not in spectrum")))?;
            densities.push(mode.density.clone());
            sigmas.push(mode.sigma);
        }
        Self::from_densities(&spectrum.grid, densities, sigmas)
    }

    /// `densities` live on the working domain of `grid`; `sigmas` supply the
    /// normal derivative `σu` for boundary gradients.
    pub fn from_densities(grid: &NystromGrid, densities: Vec<Vec<f64>>, sigmas: Vec<f64>) -> Result<Self> {
        let total = grid.total_nodes();
        if densities.iter().any(|d| d.len() != total) || sigmas.len() != densities.len() {
            return Err(Error::InvalidArgument("density length does not match the grid".into()));
        }
        let lm = assemble_layer_operators(grid);
        let lam = grid.scale;
        let n = grid.n;
        let mut planner = FftPlanner::new();
        let mut comps = Vec::with_capacity(grid.components.len());
        for gc in &grid.components {
            let range = gc.offset..gc.offset + n;
            let coarse = Quadrature {
                points: gc.points.iter().map(|p| [lam * p[0], lam * p[1]]).collect(),
                weights: gc.speeds.iter().map(|s| TAU / n as f64 * lam * s).collect(),
                densities: densities.iter().map(|d| d[range.clone()].to_vec()).collect(),
            };
            let m = n * UPSAMPLE;
            let params: Vec<f64> = (0..m).map(|j| TAU * j as f64 / m as f64).collect();
            let phys: Vec<Vec2> = params.iter().map(|&s| gc.curve.point(s)).collect();
            let fine = Quadrature {
                points: phys.iter().map(|p| [lam * p[0], lam * p[1]]).collect(),
                weights: params.iter().map(|&s| TAU / m as f64 * lam * gc.curve.speed(s)).collect(),
                densities: coarse
                    .densities
                    .iter()
                    .map(|d| fourier_upsample(d, UPSAMPLE, &mut planner))
                    .collect(),
            };
            let fft = planner.plan_fft_forward(n);
            let trace_dft = densities
                .iter()
                .map(|d| {
                    let mut buf: Vec<Complex64> = range
                        .clone()
                        .map(|i| Complex64::new((0..total).map(|j| lm.s[(i, j)] * d[j]).sum(), 0.0))
                        .collect();
                    fft.process(&mut buf);
                    buf
                })
                .collect();
            comps.push(ComponentData {
                coarse,
                fine,
                polyline: phys,
                trace_dft,
            });
        }
        Ok(Self {
            grid: grid.clone(),
            sigmas,
            comps,
        })
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn grid(&self) -> &NystromGrid {
        &self.grid
    }

    /// Nearest point on component `c` by Newton refinement from the closest
    /// fine-polyline vertex.
    pub fn project(&self, c: usize, p: Vec2) -> Projection {
        let data = &self.comps[c];
        let curve = &self.grid.components[c].curve;
        let m = data.polyline.len();
        let j = (0..m).fold(0, |b, j| {
            if dist(data.polyline[j], p) < dist(data.polyline[b], p) {
                j
            } else {
                b
            }
        });
        let ds = TAU / m as f64;
        let mut s = TAU * j as f64 / m as f64;
        for _ in 0..8 {
            let d = sub(curve.point(s), p);
            let d1 = curve.derivative(s, 1);
            let d2 = curve.derivative(s, 2);
            let f = dot(d, d1);
            let fp = dot(d1, d1) + dot(d, d2);
            if fp <= 0.0 {
                break;
            }
            let step = (f / fp).clamp(-ds, ds);
            s -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let s = s.rem_euclid(TAU);
        let foot = curve.point(s);
        Projection {
            component: c,
            s,
            distance: dist(foot, p),
            signed: dot(sub(p, foot), curve.outward_normal(s)),
        }
    }

    fn contains(&self, p: Vec2, projections: &[Projection]) -> bool {
        let near = projections
            .iter()
            .min_by(|a, b| a.distance.total_cmp(&b.distance))
            .expect("at least one component");
        let spacing = self.grid.components[near.component].curve.speed(near.s) * TAU / self.grid.n as f64;
        if near.distance < NEAR_SPACINGS * spacing {
            return near.signed < 0.0;
        }
        winding_number(&self.comps[0].polyline, p) != 0
            && self.comps[1..].iter().all(|c| winding_number(&c.polyline, p) == 0)
    }

    /// Values and gradients of every density's potential at an interior point.
    pub fn eval(&self, p: Vec2, want_gradient: bool) -> Result<Vec<PointValue>> {
        let projections: Vec<Projection> = (0..self.comps.len()).map(|c| self.project(c, p)).collect();
        let scale_len = self.grid.domain.diameter().max(1e-300);
        if projections.iter().any(|q| q.distance <= 1e-14 * scale_len) {
            return Err(Error::Evaluation(format!("point {p:?} lies on the boundary")));
        }
        if !self.contains(p, &projections) {
            return Err(Error::Evaluation(format!("point {p:?} lies outside the domain")));
        }
        let lam = self.grid.scale;
        let x = [lam * p[0], lam * p[1]];
        let mut out = vec![
            PointValue {
                value: 0.0,
                gradient: [0.0; 2]
            };
            self.len()
        ];
        for (c, data) in self.comps.iter().enumerate() {
            let q = &projections[c];
            let spacing = self.grid.components[c].curve.speed(q.s) * TAU / self.grid.n as f64;
            let quad = if q.distance < NEAR_SPACINGS * spacing {
                if q.distance < MIN_FINE_SPACINGS * spacing / UPSAMPLE as f64 {
                    return Err(Error::Accuracy(format!(
                        "point {p:?} is {:.3e} from the boundary, below the resolvable distance",
                        q.distance
                    )));
                }
                &data.fine
            } else {
                &data.coarse
            };
            for (j, y) in quad.points.iter().enumerate() {
                let d = sub(x, *y);
                let r2 = dot(d, d);
                let w = quad.weights[j];
                let g = -w * r2.ln() / (4.0 * PI);
                let gx = -w * lam / TAU / r2;
                for (k, o) in out.iter_mut().enumerate() {
                    let phi = quad.densities[k][j];
                    o.value += g * phi;
                    if want_gradient {
                        o.gradient[0] += gx * d[0] * phi;
                        o.gradient[1] += gx * d[1] * phi;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Boundary values by trigonometric interpolation of the trace, with
    /// gradient `σu ν + (∂_s u/|c'|) T`.
    pub fn boundary(&self, c: usize, s: f64) -> Result<Vec<PointValue>> {
        let data = self
            .comps
            .get(c)
            .ok_or_else(|| Error::InvalidArgument(format!("no boundary component {c}")))?;
        let n = self.grid.n;
        let curve = &self.grid.components[c].curve;
        let nu = curve.outward_normal(s);
        let tangent = [-nu[1], nu[0]];
        let speed = curve.speed(s);
        let half = n / 2;
        Ok(data
            .trace_dft
            .iter()
            .zip(&self.sigmas)
            .map(|(coef, &sigma)| {
                let (mut v, mut dv) = (0.0, 0.0);
                for (k, z) in coef.iter().enumerate() {
                    let kk = if k <= half { k as f64 } else { k as f64 - n as f64 };
                    let e = Complex64::from_polar(1.0, kk * s);
                    let w = if k == half { 0.5 } else { 1.0 };
                    if k == half {
                        // real cosine at the Nyquist frequency
                        v += w * 2.0 * z.re * (kk * s).cos();
                        dv -= w * 2.0 * z.re * kk * (kk * s).sin();
                        continue;
                    }
                    v += (z * e).re;
                    dv += (z * e * Complex64::new(0.0, kk)).re;
                }
                let (v, dv) = (v / n as f64, dv / n as f64);
                let dt = dv / speed;
                PointValue {
                    value: v,
                    gradient: [
                        sigma * v * nu[0] + dt * tangent[0],
                        sigma * v * nu[1] + dt * tangent[1],
                    ],
                }
            })
            .collect())
    }
}

/// Single-density convenience wrapper around [`InteriorEvaluator`].
pub fn evaluate_interior(grid: &NystromGrid, density: &[f64], point: Vec2, want_gradient: bool) -> Result<PointValue> {
    let ev = InteriorEvaluator::from_densities(grid, vec![density.to_vec()], vec![0.0])?;
    Ok(ev.eval(point, want_gradient)?[0])
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryTrace {
    pub values: Vec<f64>,
    pub component_norms: Vec<f64>,
    pub total_norm: f64,
}

/// `Sφ` at the nodes with physical `L²` norms per component and overall.
pub fn boundary_trace(grid: &NystromGrid, density: &[f64]) -> Result<BoundaryTrace> {
    let total = grid.total_nodes();
    if density.len() != total {
        return Err(Error::InvalidArgument("density length does not match the grid".into()));
    }
    let lm = assemble_layer_operators(grid);
    let values: Vec<f64> = (0..total)
        .map(|i| (0..total).map(|j| lm.s[(i, j)] * density[j]).sum())
        .collect();
    let w = grid.weights();
    let n = grid.n;
    let component_norms: Vec<f64> = (0..grid.components.len())
        .map(|c| wnorm(&values[c * n..(c + 1) * n], &w[c * n..(c + 1) * n]))
        .collect();
    let total_norm = component_norms.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(BoundaryTrace {
        values,
        component_norms,
        total_norm,
    })
}
