//! Analytic closed curves given by truncated Fourier series.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::polyline::{closed_polylines_intersect, signed_area};
use super::vec2::{norm, rot_cw, scale, Vec2};
use crate::error::{Error, Result};

/// Samples used for the immersion and simplicity checks.
const CHECK_SAMPLES: usize = 1024;

/// A real trigonometric polynomial `a0 + Σ a_k cos(ks) + b_k sin(ks)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigSeries {
    /// `(a_k, b_k)` for k = 0, 1, …; `b_0` is always zero.
    coeffs: Vec<(f64, f64)>,
}

impl TrigSeries {
    pub fn new(coeffs: Vec<(f64, f64)>) -> Self {
        let mut coeffs = coeffs;
        if coeffs.is_empty() {
            coeffs.push((0.0, 0.0));
        }
        coeffs[0].1 = 0.0;
        Self { coeffs }
    }

    /// Parses the nested `[[a0], [a1, b1], …]` layout.
    pub fn from_nested(rows: &[Vec<f64>]) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(rows.len());
        for (k, row) in rows.iter().enumerate() {
            let pair = match (k, row.as_slice()) {
                (0, [a0]) | (0, [a0, _]) => (*a0, 0.0),
                (_, [a, b]) => (*a, *b),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "fourier row {k} must be [a0] for k = 0 and [a_k, b_k] otherwise"
                    )))
                }
            };
            if !pair.0.is_finite() || !pair.1.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite fourier coefficient in row {k}")));
            }
            coeffs.push(pair);
        }
        Ok(Self::new(coeffs))
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| if k == 0 { vec![a] } else { vec![a, b] })
            .collect()
    }

    pub fn coeffs(&self) -> &[(f64, f64)] {
        &self.coeffs
    }

    /// `d^order/ds^order` of the series at `s`.
    pub fn eval(&self, s: f64, order: u32) -> f64 {
        let mut acc = 0.0;
        for (k, &(a, b)) in self.coeffs.iter().enumerate() {
            if k == 0 {
                if order == 0 {
                    acc += a;
                }
                continue;
            }
            let kf = k as f64;
            let (sn, c) = (kf * s).sin_cos();
            // cos(ks + nπ/2), sin(ks + nπ/2)
            let (cs, ss) = match order % 4 {
                0 => (c, sn),
                1 => (-sn, c),
                2 => (-c, -sn),
                _ => (sn, -c),
            };
            acc += kf.powi(order as i32) * (a * cs + b * ss);
        }
        acc
    }

    fn map(&self, f: impl Fn(usize, f64, f64) -> (f64, f64)) -> Self {
        Self::new(self.coeffs.iter().enumerate().map(|(k, &(a, b))| f(k, a, b)).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct CurveRecord {
    fourier_x: Vec<Vec<f64>>,
    fourier_y: Vec<Vec<f64>>,
    #[serde(default)]
    label: String,
}

/// Smooth 2π-periodic closed curve `s ↦ (x(s), y(s))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveRecord", into = "CurveRecord")]
pub struct ParamCurve {
    x: TrigSeries,
    y: TrigSeries,
    pub label: String,
    /// True when the enclosed region (for an outer boundary) or the domain
    /// (once placed in a [`super::Domain`]) lies to the left of the tangent.
    pub orientation_hint: bool,
}

impl TryFrom<CurveRecord> for ParamCurve {
    type Error = Error;

    fn try_from(r: CurveRecord) -> Result<Self> {
        ParamCurve::new(TrigSeries::from_nested(&r.fourier_x)?, TrigSeries::from_nested(&r.fourier_y)?, r.label)
    }
}

impl From<ParamCurve> for CurveRecord {
    fn from(c: ParamCurve) -> Self {
        CurveRecord {
            fourier_x: c.x.to_nested(),
            fourier_y: c.y.to_nested(),
            label: c.label,
        }
    }
}

impl ParamCurve {
    /// Builds a curve and checks that it is immersed and simple.
    pub fn new(x: TrigSeries, y: TrigSeries, label: impl Into<String>) -> Result<Self> {
        let mut curve = Self {
            x,
            y,
            label: label.into(),
            orientation_hint: true,
        };
        for i in 0..CHECK_SAMPLES {
            let s = TAU * i as f64 / CHECK_SAMPLES as f64;
            let speed = curve.speed(s);
            if !(speed >= 1e-12) {
                return Err(Error::Immersion { s, speed });
            }
        }
        let poly = curve.polyline(CHECK_SAMPLES);
        if closed_polylines_intersect(std::slice::from_ref(&poly), &[]) {
            return Err(Error::NotSimple { label: curve.label });
        }
        curve.orientation_hint = signed_area(&poly) > 0.0;
        Ok(curve)
    }

    /// Circle of radius `r` about `center`; counter-clockwise when `ccw`.
    pub fn circle(center: Vec2, r: f64, ccw: bool, label: impl Into<String>) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("circle radius must be positive, got {r}")));
        }
        let sy = if ccw { r } else { -r };
        Self::new(
            TrigSeries::new(vec![(center[0], 0.0), (r, 0.0)]),
            TrigSeries::new(vec![(center[1], 0.0), (0.0, sy)]),
            label,
        )
    }

    /// Axis-aligned ellipse `(a cos s, b sin s)`, counter-clockwise.
    pub fn ellipse(a: f64, b: f64, label: impl Into<String>) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidArgument(format!("ellipse semi-axes must be positive, got {a}, {b}")));
        }
        Self::new(
            TrigSeries::new(vec![(0.0, 0.0), (a, 0.0)]),
            TrigSeries::new(vec![(0.0, 0.0), (0.0, b)]),
            label,
        )
    }

    pub fn fourier_x(&self) -> &TrigSeries {
        &self.x
    }

    pub fn fourier_y(&self) -> &TrigSeries {
        &self.y
    }

    pub fn point(&self, s: f64) -> Vec2 {
        [self.x.eval(s, 0), self.y.eval(s, 0)]
    }

    pub fn derivative(&self, s: f64, order: u32) -> Vec2 {
        [self.x.eval(s, order), self.y.eval(s, order)]
    }

    /// `|c'(s)|`.
    pub fn speed(&self, s: f64) -> f64 {
        norm(self.derivative(s, 1))
    }

    /// Signed curvature `(x'y'' − y'x'')/|c'|³`.
    pub fn curvature(&self, s: f64) -> f64 {
        let d1 = self.derivative(s, 1);
        let d2 = self.derivative(s, 2);
        (d1[0] * d2[1] - d1[1] * d2[0]) / norm(d1).powi(3)
    }

    /// Unit tangent rotated by −π/2.
    pub fn outward_normal(&self, s: f64) -> Vec2 {
        let d1 = self.derivative(s, 1);
        rot_cw(scale(d1, 1.0 / norm(d1)))
    }

    pub fn polyline(&self, n: usize) -> Vec<Vec2> {
        (0..n).map(|i| self.point(TAU * i as f64 / n as f64)).collect()
    }

    /// Same trace traversed backwards (`s ↦ −s`).
    pub fn reversed(&self) -> Self {
        Self {
            x: self.x.map(|_, a, b| (a, -b)),
            y: self.y.map(|_, a, b| (a, -b)),
            label: self.label.clone(),
            orientation_hint: !self.orientation_hint,
        }
    }

    /// Dilation about the origin by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            x: self.x.map(|_, a, b| (a * factor, b * factor)),
            y: self.y.map(|_, a, b| (a * factor, b * factor)),
            label: self.label.clone(),
            orientation_hint: self.orientation_hint,
        }
    }

    /// Enclosed signed area by spectrally accurate trapezoid quadrature.
    pub fn signed_area(&self) -> f64 {
        let n = CHECK_SAMPLES;
        (0..n)
            .map(|i| {
                let s = TAU * i as f64 / n as f64;
                let p = self.point(s);
                let d = self.derivative(s, 1);
                p[0] * d[1] - p[1] * d[0]
            })
            .sum::<f64>()
            * 0.5
            * TAU
            / n as f64
    }

    /// Arc length by trapezoid quadrature on `n` samples.
    pub fn length(&self, n: usize) -> f64 {
        (0..n).map(|i| self.speed(TAU * i as f64 / n as f64)).sum::<f64>() * TAU / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let c = ParamCurve::new(
            TrigSeries::new(vec![(0.1, 0.0), (1.0, 0.2), (0.1, -0.05)]),
            TrigSeries::new(vec![(0.0, 0.0), (0.1, 0.9), (0.0, 0.07)]),
            "wobbly",
        )
        .unwrap();
        let h = 1e-5;
        for &s in &[0.0, 0.7, 2.1, 5.9] {
            for order in 0..3 {
                let fd = [0, 1].map(|d| {
                    (c.derivative(s + h, order)[d] - c.derivative(s - h, order)[d]) / (2.0 * h)
                });
                let an = c.derivative(s, order + 1);
                for d in 0..2 {
                    assert!((fd[d] - an[d]).abs() < 1e-8, "order {order} dim {d}: {} vs {}", fd[d], an[d]);
                }
            }
        }
    }

    #[test]
    fn nested_json_layout_round_trips() {
        let json = r#"{"fourier_x": [[0.0], [2.0, 0.0]], "fourier_y": [[0.0], [0.0, 1.0]], "label": "e"}"#;
        let c: ParamCurve = serde_json::from_str(json).unwrap();
        assert_eq!(c.point(0.0), [2.0, 0.0]);
        let back = serde_json::to_value(&c).unwrap();
        assert_eq!(back["fourier_x"], serde_json::json!([[0.0], [2.0, 0.0]]));
        assert!(c.orientation_hint);
    }

    #[test]
    fn rejects_degenerate_and_self_intersecting_curves() {
        let flat = ParamCurve::new(
            TrigSeries::new(vec![(0.0, 0.0), (1.0, 0.0)]),
            TrigSeries::new(vec![(0.0, 0.0)]),
            "flat",
        );
        assert!(matches!(flat, Err(Error::Immersion { .. })));
        // figure-eight: (sin s, sin 2s)
        let eight = ParamCurve::new(
            TrigSeries::new(vec![(0.0, 0.0), (0.0, 1.0)]),
            TrigSeries::new(vec![(0.0, 0.0), (0.0, 0.0), (0.0, 1.0)]),
            "eight",
        );
        assert!(matches!(eight, Err(Error::NotSimple { .. })));
        assert!(TrigSeries::from_nested(&[vec![0.0], vec![1.0]]).is_err());
    }

    #[test]
    fn reversal_flips_orientation() {
        let c = ParamCurve::circle([0.0, 0.0], 1.0, true, "c").unwrap();
        let r = c.reversed();
        assert!(c.signed_area() > 0.0 && r.signed_area() < 0.0);
        assert!((c.signed_area() - std::f64::consts::PI).abs() < 1e-13);
        assert!((r.curvature(0.3) + 1.0).abs() < 1e-14);
    }
}
