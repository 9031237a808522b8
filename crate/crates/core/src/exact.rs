//! Closed-form Steklov eigenpairs on the disk, the annulus `B(0,1) \ B(0,r0)`
//! and the flat cylinder `(−1,1) × (ℝ/Lℤ)`.
//!
//! Every eigenpair is normalized so that its boundary trace has unit
//! `L²(∂Ω)` norm, summed over all boundary components.
//!
//! Points are Cartesian `(x, y)` for the disk and annulus and `(s, x)` for
//! the cylinder, with `s ∈ [−1, 1]` the axial coordinate and `x` the
//! periodic one.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Domain, Vec2};

/// Slack used when deciding whether a point lies in the closed domain.
const CLOSURE_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ExactModel {
    Disk {
        #[serde(rename = "R")]
        radius: f64,
    },
    /// Outer radius 1, inner radius `r0`.
    Annulus { r0: f64 },
    #[serde(rename = "cylinder")]
    FlatCylinder {
        #[serde(rename = "L")]
        length: f64,
    },
}

impl ExactModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ExactModel::Disk { radius } => radius > 0.0,
            ExactModel::Annulus { r0 } => r0 > 0.0 && r0 < 1.0,
            ExactModel::FlatCylinder { length } => length > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid model parameters: {self:?}")))
        }
    }

    /// Boundary component labels, in the same order as the matching [`Domain`].
    pub fn component_labels(&self) -> Vec<&'static str> {
        match self {
            ExactModel::Disk { .. } => vec!["boundary"],
            ExactModel::Annulus { .. } => vec!["outer", "inner"],
            ExactModel::FlatCylinder { .. } => vec!["left", "right"],
        }
    }

    /// Planar domain for the disk and annulus; the cylinder has none.
    pub fn domain(&self) -> Result<Domain> {
        match *self {
            ExactModel::Disk { radius } => Domain::disk(radius),
            ExactModel::Annulus { r0 } => Domain::annulus(r0),
            ExactModel::FlatCylinder { .. } => Err(Error::InvalidArgument(
                "the flat cylinder has no planar chart".into(),
            )),
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        match *self {
            ExactModel::Disk { radius } => p[0].hypot(p[1]) <= radius * (1.0 + CLOSURE_SLACK),
            ExactModel::Annulus { r0 } => {
                let r = p[0].hypot(p[1]);
                r >= r0 * (1.0 - CLOSURE_SLACK) && r <= 1.0 + CLOSURE_SLACK
            }
            ExactModel::FlatCylinder { .. } => p[0].abs() <= 1.0 + CLOSURE_SLACK && p[1].is_finite(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `e^{+ikθ}` angular dependence (disk).
    Plus,
    /// `e^{−ikθ}` angular dependence (disk).
    Minus,
    /// Smaller annulus root `σ_{k,1}`.
    First,
    /// Larger annulus root `σ_{k,2}`.
    Second,
    /// `cosh` profile on the cylinder.
    Even,
    /// `sinh` profile on the cylinder.
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Shape {
    /// `(x + i·parity·y)^k / R^k`
    DiskPower { radius: f64, parity: f64 },
    /// `e^{ikθ}(r^k + β r^{−k})`
    AnnulusPower { beta: f64 },
    /// `1 + σ log r`
    AnnulusLog,
    /// `cosh(λs)/cosh λ` or `sinh(λs)/sinh λ`, times `L^{−1/2} e^{2πikx/L}`
    Cylinder { lambda: f64, length: f64, odd: bool },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactEigenpair {
    pub model: ExactModel,
    pub sigma: f64,
    pub k: u32,
    pub branch: Branch,
    /// Constant making the boundary trace unit-norm.
    pub normalizer: f64,
    shape: Shape,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactValue {
    pub value: Complex64,
    pub gradient: Option<[Complex64; 2]>,
}

impl ExactEigenpair {
    /// Semiclassical parameter `1/σ`, undefined for `σ = 0`.
    pub fn h(&self) -> Option<f64> {
        (self.sigma > 0.0).then(|| 1.0 / self.sigma)
    }

    /// Unnormalized radial/axial profile, its derivative, and the angular
    /// frequency factor.
    fn profile(&self, p: Vec2) -> (Complex64, [Complex64; 2]) {
        let k = self.k as f64;
        match self.shape {
            Shape::DiskPower { radius, parity } => {
                let z = Complex64::new(p[0] / radius, parity * p[1] / radius);
                if self.k == 0 {
                    return (Complex64::new(1.0, 0.0), [Complex64::new(0.0, 0.0); 2]);
                }
                let zk1 = z.powu(self.k - 1);
                let dz = zk1 * (k / radius);
                (zk1 * z, [dz, dz * Complex64::new(0.0, parity)])
            }
            Shape::AnnulusPower { beta } => {
                let r = p[0].hypot(p[1]);
                let theta = p[1].atan2(p[0]);
                let f = r.powf(k) + beta * r.powf(-k);
                let df = k * r.powf(k - 1.0) - k * beta * r.powf(-k - 1.0);
                angular(k, theta, r, f, df)
            }
            Shape::AnnulusLog => {
                let r = p[0].hypot(p[1]);
                let theta = p[1].atan2(p[0]);
                angular(0.0, theta, r, 1.0 + self.sigma * r.ln(), self.sigma / r)
            }
            Shape::Cylinder { lambda, length, odd } => {
                let s = p[0];
                let (f, df) = if odd {
                    ((lambda * s).sinh() / lambda.sinh(), lambda * (lambda * s).cosh() / lambda.sinh())
                } else {
                    ((lambda * s).cosh() / lambda.cosh(), lambda * (lambda * s).sinh() / lambda.cosh())
                };
                let freq = TAU * k / length;
                let phase = Complex64::from_polar(1.0 / length.sqrt(), freq * p[1]);
                (phase * f, [phase * df, phase * f * Complex64::new(0.0, freq)])
            }
        }
    }

    pub fn value(&self, p: Vec2) -> Result<Complex64> {
        Ok(exact_evaluate(self, p, false)?.value)
    }

    pub fn value_and_gradient(&self, p: Vec2) -> Result<(Complex64, [Complex64; 2])> {
        let v = exact_evaluate(self, p, true)?;
        Ok((v.value, v.gradient.expect("gradient requested")))
    }

    /// `‖u‖_{L²}` on each boundary component (closed form).
    pub fn boundary_norms(&self) -> Vec<f64> {
        let c = self.normalizer;
        match (self.model, self.shape) {
            (ExactModel::Disk { .. }, _) => vec![1.0],
            (ExactModel::Annulus { r0 }, Shape::AnnulusPower { beta }) => {
                let k = self.k as f64;
                let inner = r0.powf(k) + beta * r0.powf(-k);
                vec![c * (TAU).sqrt() * (1.0 + beta).abs(), c * (TAU * r0).sqrt() * inner.abs()]
            }
            (ExactModel::Annulus { r0 }, _) => {
                vec![c * TAU.sqrt(), c * (TAU * r0).sqrt() * (1.0 + self.sigma * r0.ln()).abs()]
            }
            (ExactModel::FlatCylinder { .. }, _) => vec![c, c],
        }
    }
}

fn angular(k: f64, theta: f64, r: f64, f: f64, df: f64) -> (Complex64, [Complex64; 2]) {
    let e = Complex64::from_polar(1.0, k * theta);
    let (st, ct) = theta.sin_cos();
    // ∇ = f' r̂ + (ik f / r) θ̂
    let radial = e * df;
    let tangential = e * Complex64::new(0.0, k * f / r);
    (
        e * f,
        [radial * ct - tangential * st, radial * st + tangential * ct],
    )
}

pub fn exact_evaluate(pair: &ExactEigenpair, point: Vec2, want_gradient: bool) -> Result<ExactValue> {
    if !pair.model.contains(point) {
        return Err(Error::Evaluation(format!("point {point:?} lies outside {:?}", pair.model)));
    }
    let (v, g) = pair.profile(point);
    let c = pair.normalizer;
    Ok(ExactValue {
        value: v * c,
        gradient: want_gradient.then(|| [g[0] * c, g[1] * c]),
    })
}

/// Disk eigenpair `(2πR)^{−1/2} R^{−k} r^k e^{±ikθ}`, `σ = k/R`.
pub fn disk_eigenpair(radius: f64, k: u32, parity: Branch) -> Result<ExactEigenpair> {
    let model = ExactModel::Disk { radius };
    model.validate()?;
    let sign = match parity {
        Branch::Plus => 1.0,
        Branch::Minus => -1.0,
        other => return Err(Error::InvalidArgument(format!("disk modes take plus/minus, got {other:?}"))),
    };
    Ok(ExactEigenpair {
        model,
        sigma: k as f64 / radius,
        k,
        branch: parity,
        normalizer: 1.0 / (TAU * radius).sqrt(),
        shape: Shape::DiskPower { radius, parity: sign },
    })
}

/// Coefficients `(b, c)` of `p_k(σ) = σ² − bσ + c`, whose roots are the
/// annulus eigenvalues with angular frequency `k`.
///
/// `k = 0` is the `k → 0` limit, `b = (1 + r0)/(r0 log(1/r0))`, `c = 0`.
pub fn annulus_char_poly(k: u32, r0: f64) -> Result<(f64, f64)> {
    ExactModel::Annulus { r0 }.validate()?;
    if k == 0 {
        return Ok(((1.0 + r0) / (r0 * (1.0 / r0).ln()), 0.0));
    }
    let kf = k as f64;
    let mut q = r0.powf(2.0 * kf);
    if q < 1e-300 {
        q = 0.0;
    }
    let b = kf * ((1.0 + r0) / r0) * ((1.0 + q) / (1.0 - q));
    Ok((b, kf * kf / r0))
}

/// Roots of `p_k`, ascending, without cancellation in the smaller one.
pub fn annulus_roots(k: u32, r0: f64) -> Result<(f64, f64)> {
    let (b, c) = annulus_char_poly(k, r0)?;
    let large = 0.5 * (b + (b * b - 4.0 * c).max(0.0).sqrt());
    Ok((c / large, large))
}

/// The two annulus eigenpairs with angular frequency `k`, `σ_{k,1} < σ_{k,2}`.
pub fn annulus_eigenpairs(k: u32, r0: f64) -> Result<(ExactEigenpair, ExactEigenpair)> {
    let model = ExactModel::Annulus { r0 };
    let (s1, s2) = annulus_roots(k, r0)?;
    let kf = k as f64;
    let make = |sigma: f64, branch: Branch| -> ExactEigenpair {
        let shape = if k == 0 {
            if branch == Branch::First {
                Shape::AnnulusPower { beta: 0.0 }
            } else {
                Shape::AnnulusLog
            }
        } else {
            // each form is the boundary condition on the circle where it is
            // well conditioned
            let beta = match branch {
                Branch::First => r0.powf(2.0 * kf) * (sigma + kf / r0) / (kf / r0 - sigma),
                _ => (kf - sigma) / (kf + sigma),
            };
            Shape::AnnulusPower { beta }
        };
        let mut pair = ExactEigenpair {
            model,
            sigma,
            k,
            branch,
            normalizer: 1.0,
            shape,
        };
        let total = pair.boundary_norms().iter().map(|n| n * n).sum::<f64>().sqrt();
        pair.normalizer = 1.0 / total;
        pair
    };
    Ok((make(s1, Branch::First), make(s2, Branch::Second)))
}

/// Single cylinder eigenpair; `k = 0` is only defined on the even branch.
pub fn cylinder_eigenpair(length: f64, k: u32, branch: Branch) -> Result<ExactEigenpair> {
    let model = ExactModel::FlatCylinder { length };
    model.validate()?;
    let lambda = TAU * k as f64 / length;
    let (odd, sigma) = match branch {
        Branch::Even => (false, lambda * lambda.tanh()),
        Branch::Odd if k == 0 => {
            return Err(Error::Undefined("odd cylinder branch needs k ≥ 1 (coth λ at λ = 0)".into()))
        }
        Branch::Odd => (true, lambda / lambda.tanh()),
        other => return Err(Error::InvalidArgument(format!("cylinder modes take even/odd, got {other:?}"))),
    };
    Ok(ExactEigenpair {
        model,
        sigma,
        k,
        branch,
        normalizer: 1.0 / 2f64.sqrt(),
        shape: Shape::Cylinder { lambda, length, odd },
    })
}

/// Even (`σ = λ tanh λ`) and odd (`σ' = λ coth λ`) pairs, `λ = 2πk/L`.
pub fn cylinder_eigenpairs(length: f64, k: u32) -> Result<(ExactEigenpair, ExactEigenpair)> {
    Ok((
        cylinder_eigenpair(length, k, Branch::Even)?,
        cylinder_eigenpair(length, k, Branch::Odd)?,
    ))
}

/// Boundary sample points and outward normals of a disk/annulus model,
/// `n` per component. Used by tests and the CLI figure code.
pub fn boundary_samples(model: &ExactModel, n: usize) -> Vec<(usize, Vec2, Vec2, f64)> {
    let circles: Vec<(f64, f64)> = match *model {
        ExactModel::Disk { radius } => vec![(radius, 1.0)],
        ExactModel::Annulus { r0 } => vec![(1.0, 1.0), (r0, -1.0)],
        ExactModel::FlatCylinder { .. } => vec![],
    };
    let mut out = Vec::new();
    for (c, &(r, orient)) in circles.iter().enumerate() {
        for i in 0..n {
            let th = TAU * i as f64 / n as f64;
            let (s, co) = th.sin_cos();
            out.push((c, [r * co, r * s], [orient * co, orient * s], TAU * r / n as f64));
        }
    }
    out
}
