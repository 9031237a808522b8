//! Fermi normal coordinates about boundary components.
//!
//! In the Euclidean plane the normal geodesics are straight lines, so the
//! chart is `(s, t) ↦ c(s) − t ν(s)` with length element `(1 − tκ(s))|c'(s)|`
//! along each offset curve `H_t`.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use super::curve::ParamCurve;
use super::domain::Domain;
use super::polyline::{closed_polylines_intersect, winding_number};
use super::vec2::{dist, norm, rot_cw, scale, sub, Vec2};
use crate::error::{Error, Result};

/// Curve samples for the focal bound.
const FOCAL_SAMPLES: usize = 2048;
/// Polyline samples per component for the collision test.
const COLLISION_SAMPLES: usize = 1024;
/// Offset points tested against the cut locus, per component.
const CUT_LOCUS_PROBES: usize = 256;
/// Upward scan resolution, in units of the domain diameter.
const COLLISION_SCAN_STEPS: usize = 256;
/// Bisection stops once the bracket is below this fraction of the diameter.
const BISECTION_REL_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FramePoint {
    pub point: Vec2,
    pub unit_tangent: Vec2,
    pub outward_normal: Vec2,
    /// Signed curvature; positive where the boundary is convex seen from the domain.
    pub curvature: f64,
    /// `|c'(s)|`.
    pub speed: f64,
}

pub fn curve_frame(curve: &ParamCurve, s: f64) -> Result<FramePoint> {
    let d1 = curve.derivative(s, 1);
    let d2 = curve.derivative(s, 2);
    let speed = norm(d1);
    if !(speed >= 1e-12) {
        return Err(Error::Immersion { s, speed });
    }
    let unit_tangent = scale(d1, 1.0 / speed);
    Ok(FramePoint {
        point: curve.point(s),
        unit_tangent,
        outward_normal: rot_cw(unit_tangent),
        curvature: (d1[0] * d2[1] - d1[1] * d2[0]) / speed.powi(3),
        speed,
    })
}

/// `c(s) − t ν(s)`.
pub fn fermi_point(curve: &ParamCurve, s: f64, t: f64) -> Vec2 {
    sub(curve.point(s), scale(curve.outward_normal(s), t))
}

/// Arc-length density `(1 − tκ(s))|c'(s)|` of the offset curve `H_t`.
pub fn offset_jacobian(curve: &ParamCurve, s: f64, t: f64) -> Result<f64> {
    let f = curve_frame(curve, s)?;
    let factor = 1.0 - t * f.curvature;
    if factor <= 0.0 {
        return Err(Error::ChartExceeded {
            t,
            r_max: 1.0 / f.curvature,
        });
    }
    Ok(factor * f.speed)
}

fn validate_source(domain: &Domain, source: &[usize]) -> Result<()> {
    if source.is_empty() {
        return Err(Error::EmptySource);
    }
    for (k, &c) in source.iter().enumerate() {
        domain.component(c)?;
        if source[..k].contains(&c) {
            return Err(Error::InvalidArgument(format!("component {c} listed twice")));
        }
    }
    Ok(())
}

/// Largest curvature on the curve: dense sampling, then golden-section refinement.
fn max_curvature(curve: &ParamCurve) -> f64 {
    let step = TAU / FOCAL_SAMPLES as f64;
    let (best, kmax) = (0..FOCAL_SAMPLES)
        .map(|i| (i, curve.curvature(step * i as f64)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let (mut a, mut b) = (step * (best as f64 - 1.0), step * (best as f64 + 1.0));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if curve.curvature(x1) > curve.curvature(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    kmax.max(curve.curvature(0.5 * (a + b)))
}

/// Smallest focal distance `1/κ` over the source components (∞ if none is convex).
pub fn focal_bound(domain: &Domain, source: &[usize]) -> Result<f64> {
    validate_source(domain, source)?;
    Ok(source
        .iter()
        .map(|&c| max_curvature(&domain.components()[c]))
        .filter(|&k| k > 0.0)
        .map(|k| 1.0 / k)
        .fold(f64::INFINITY, f64::min))
}

/// True when the offsets at distance `t` from the source components cross
/// each other or run into a non-source component.
fn offsets_collide(domain: &Domain, source: &[usize], t: f64) -> bool {
    let moving: Vec<Vec<Vec2>> = source
        .iter()
        .map(|&c| {
            let curve = &domain.components()[c];
            (0..COLLISION_SAMPLES)
                .map(|i| fermi_point(curve, TAU * i as f64 / COLLISION_SAMPLES as f64, t))
                .collect()
        })
        .collect();
    let fixed: Vec<Vec<Vec2>> = (0..domain.len())
        .filter(|c| !source.contains(c))
        .map(|c| domain.components()[c].polyline(COLLISION_SAMPLES))
        .collect();
    closed_polylines_intersect(&moving, &fixed)
        || left_domain(domain, source, &moving)
        || past_cut_locus(domain, source, t)
}

/// True when an offset has passed wholly into a hole or out of the outer
/// boundary without any segment crossing (e.g. concentric circles).
fn left_domain(domain: &Domain, source: &[usize], moving: &[Vec<Vec2>]) -> bool {
    let stride = COLLISION_SAMPLES / CUT_LOCUS_PROBES;
    (0..domain.len()).filter(|c| !source.contains(c)).any(|c| {
        let poly = domain.components()[c].polyline(COLLISION_SAMPLES);
        moving.iter().any(|offset| {
            offset.iter().step_by(stride).any(|&p| {
                let inside = winding_number(&poly, p) != 0;
                if c == 0 {
                    !inside
                } else {
                    inside
                }
            })
        })
    })
}

/// True when some offset point at distance `t` lies strictly closer than `t`
/// to a source curve. Monotone in `t`, since distance is 1-Lipschitz along
/// the normal segments.
fn past_cut_locus(domain: &Domain, source: &[usize], t: f64) -> bool {
    let vertices: Vec<Vec2> = source
        .iter()
        .flat_map(|&c| domain.components()[c].polyline(COLLISION_SAMPLES))
        .collect();
    let stride = COLLISION_SAMPLES / CUT_LOCUS_PROBES;
    source.par_iter().any(|&c| {
        let curve = &domain.components()[c];
        (0..CUT_LOCUS_PROBES).into_par_iter().any(|i| {
            // probes sit on vertices, so the base point is at distance exactly t
            let s = TAU * (i * stride) as f64 / COLLISION_SAMPLES as f64;
            let p = fermi_point(curve, s, t);
            let limit = t * (1.0 - 1e-9);
            vertices.iter().any(|&v| dist(p, v) < limit)
        })
    })
}

/// Maximal tube width about the source components: the smaller of the focal
/// bound and the first offset distance at which an offset crosses another
/// component or passes the cut locus of the source curves.
///
/// Collisions are not monotone in `t` (offsets can pass through each other),
/// so the first one is bracketed by an upward scan before bisecting.
pub fn estimate_r_max(domain: &Domain, source: &[usize]) -> Result<f64> {
    let focal = focal_bound(domain, source)?;
    let diameter = domain.diameter();
    let tol = BISECTION_REL_TOL * diameter;
    let cap = focal.min(diameter);
    let step = diameter / COLLISION_SCAN_STEPS as f64;
    let mut lo = 0.0;
    let mut hi = None;
    while lo < cap {
        let next = (lo + step).min(cap - tol);
        if next <= lo {
            break;
        }
        if offsets_collide(domain, source, next) {
            hi = Some(next);
            break;
        }
        lo = next;
    }
    let Some(mut hi) = hi else {
        return Ok(cap);
    };
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if offsets_collide(domain, source, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Debug, Serialize)]
pub struct ChartSample {
    pub component: usize,
    pub s: f64,
    pub point: Vec2,
    pub outward_normal: Vec2,
    pub kappa: f64,
    pub speed: f64,
}

/// Sampled Fermi chart `φ([0, r_max))` about a set of boundary components.
#[derive(Clone, Debug, Serialize)]
pub struct FermiChart {
    pub source: Vec<usize>,
    pub labels: Vec<String>,
    pub s_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `n_s` samples per source component, components in `source` order.
    pub samples: Vec<ChartSample>,
    /// `jacobian[i][j]`: `(1 − t_i κ_j)|c'_j|`.
    pub jacobian: Vec<Vec<f64>>,
    pub r_max: f64,
}

impl FermiChart {
    /// Identifier built from the source component labels.
    pub fn id(&self) -> String {
        self.labels.join("+")
    }

    /// Parameter step of the equispaced `s` grid.
    pub fn ds(&self) -> f64 {
        TAU / self.s_grid.len() as f64
    }

    pub fn check_t(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t < self.r_max) {
            return Err(Error::ChartExceeded { t, r_max: self.r_max });
        }
        Ok(())
    }

    pub fn point(&self, sample: usize, t: f64) -> Vec2 {
        let smp = &self.samples[sample];
        sub(smp.point, scale(smp.outward_normal, t))
    }

    pub fn jacobian_at(&self, sample: usize, t: f64) -> Result<f64> {
        self.check_t(t)?;
        let smp = &self.samples[sample];
        Ok((1.0 - t * smp.kappa) * smp.speed)
    }

    pub fn kappa_max(&self) -> f64 {
        self.samples.iter().map(|s| s.kappa).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Samples the chart on `n_s` equispaced parameters per source component.
pub fn build_fermi_chart(domain: &Domain, source: &[usize], n_s: usize, t_grid: &[f64]) -> Result<FermiChart> {
    validate_source(domain, source)?;
    if n_s < 4 {
        return Err(Error::InvalidArgument(format!("n_s must be at least 4, got {n_s}")));
    }
    let r_max = estimate_r_max(domain, source)?;
    for &t in t_grid {
        if !(t >= 0.0 && t < r_max) {
            return Err(Error::ChartExceeded { t, r_max });
        }
    }
    let s_grid: Vec<f64> = (0..n_s).map(|i| TAU * i as f64 / n_s as f64).collect();
    let pairs: Vec<(usize, f64)> = source.iter().flat_map(|&c| s_grid.iter().map(move |&s| (c, s))).collect();
    let samples = pairs
        .par_iter()
        .map(|&(c, s)| {
            let f = curve_frame(&domain.components()[c], s)?;
            Ok(ChartSample {
                component: c,
                s,
                point: f.point,
                outward_normal: f.outward_normal,
                kappa: f.curvature,
                speed: f.speed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let jacobian: Vec<Vec<f64>> = t_grid
        .iter()
        .map(|&t| samples.iter().map(|smp| (1.0 - t * smp.kappa) * smp.speed).collect())
        .collect();
    if jacobian.iter().flatten().any(|&j| j <= 0.0) {
        return Err(Error::ChartExceeded {
            t: t_grid.iter().copied().fold(0.0, f64::max),
            r_max,
        });
    }
    Ok(FermiChart {
        source: source.to_vec(),
        labels: source.iter().map(|&c| domain.components()[c].label.clone()).collect(),
        s_grid,
        t_grid: t_grid.to_vec(),
        samples,
        jacobian,
        r_max,
    })
}
