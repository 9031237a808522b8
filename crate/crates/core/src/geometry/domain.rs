use serde::{Deserialize, Serialize};

use super::curve::ParamCurve;
use super::polyline::{closed_polylines_intersect, winding_number};
use super::vec2::{dist, Vec2};
use crate::error::{Error, Result};

const CHECK_SAMPLES: usize = 512;

/// Planar domain bounded by one outer curve and zero or more holes.
///
/// Every component is stored with the domain on its left, so the outward
/// normal is the unit tangent rotated by −π/2 on all components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainRecord", into = "DomainRecord")]
pub struct Domain {
    components: Vec<ParamCurve>,
}

#[derive(Serialize, Deserialize)]
struct DomainRecord {
    components: Vec<ParamCurve>,
}

impl TryFrom<DomainRecord> for Domain {
    type Error = Error;
    fn try_from(r: DomainRecord) -> Result<Self> {
        Domain::new(r.components)
    }
}

impl From<Domain> for DomainRecord {
    fn from(d: Domain) -> Self {
        DomainRecord { components: d.components }
    }
}

impl Domain {
    /// Assembles a domain; `components[0]` is the outer boundary.
    ///
    /// Curves traversed against the domain-left convention are reversed.
    pub fn new(components: Vec<ParamCurve>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidDomain("a domain needs an outer boundary".into()));
        }
        let components: Vec<ParamCurve> = components
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let area = c.signed_area();
                let wants_positive = i == 0;
                let mut c = if (area > 0.0) == wants_positive { c } else { c.reversed() };
                c.orientation_hint = true;
                c
            })
            .collect();

        let polys: Vec<Vec<Vec2>> = components.iter().map(|c| c.polyline(CHECK_SAMPLES)).collect();
        for (i, hole) in polys.iter().enumerate().skip(1) {
            if hole.iter().any(|&p| winding_number(&polys[0], p) == 0) {
                return Err(Error::InvalidDomain(format!(
                    "hole `{}` is not enclosed by the outer boundary",
                    components[i].label
                )));
            }
            for (j, other) in polys.iter().enumerate().skip(1) {
                if i != j && hole.iter().any(|&p| winding_number(other, p) != 0) {
                    return Err(Error::InvalidDomain(format!(
                        "holes `{}` and `{}` overlap",
                        components[i].label, components[j].label
                    )));
                }
            }
        }
        for i in 0..polys.len() {
            for j in i + 1..polys.len() {
                if closed_polylines_intersect(&[polys[i].clone()], &[polys[j].clone()]) {
                    return Err(Error::InvalidDomain(format!(
                        "components `{}` and `{}` intersect",
                        components[i].label, components[j].label
                    )));
                }
            }
        }
        Ok(Self { components })
    }

    pub fn disk(radius: f64) -> Result<Self> {
        Self::new(vec![ParamCurve::circle([0.0, 0.0], radius, true, "boundary")?])
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![ParamCurve::ellipse(a, b, "boundary")?])
    }

    /// `B(0,1) \ B(0,r0)`; component 0 is the outer circle, 1 the inner.
    pub fn annulus(r0: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0 < 1.0) {
            return Err(Error::InvalidArgument(format!("annulus needs 0 < r0 < 1, got {r0}")));
        }
        Self::new(vec![
            ParamCurve::circle([0.0, 0.0], 1.0, true, "outer")?,
            ParamCurve::circle([0.0, 0.0], r0, false, "inner")?,
        ])
    }

    pub fn components(&self) -> &[ParamCurve] {
        &self.components
    }

    pub fn component(&self, i: usize) -> Result<&ParamCurve> {
        self.components
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("no boundary component {i}")))
    }

    pub fn component_labels(&self) -> Vec<String> {
        self.components.iter().map(|c| c.label.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn all_components(&self) -> Vec<usize> {
        (0..self.components.len()).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            components: self.components.iter().map(|c| c.scaled(factor)).collect(),
        }
    }

    /// Largest distance between samples of the outer boundary.
    pub fn diameter(&self) -> f64 {
        let poly = self.components[0].polyline(256);
        let mut d: f64 = 0.0;
        for (i, &p) in poly.iter().enumerate() {
            for &q in &poly[i + 1..] {
                d = d.max(dist(p, q));
            }
        }
        d
    }

    pub fn total_length(&self) -> f64 {
        self.components.iter().map(|c| c.length(4096)).sum()
    }

    /// Point-in-domain test against polylines with `n` samples per component.
    pub fn contains(&self, p: Vec2, n: usize) -> bool {
        let polys: Vec<Vec<Vec2>> = self.components.iter().map(|c| c.polyline(n)).collect();
        winding_number(&polys[0], p) != 0 && polys[1..].iter().all(|h| winding_number(h, p) == 0)
    }
}

/// Built-in domain vocabulary used in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DomainSpec {
    #[serde(alias = "disk")]
    Circle {
        #[serde(rename = "R")]
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    Annulus {
        r0: f64,
    },
    Curves {
        components: Vec<ParamCurve>,
    },
}

impl DomainSpec {
    pub fn build(&self) -> Result<Domain> {
        match self {
            DomainSpec::Circle { radius } => Domain::disk(*radius),
            DomainSpec::Ellipse { a, b } => Domain::ellipse(*a, *b),
            DomainSpec::Annulus { r0 } => Domain::annulus(*r0),
            DomainSpec::Curves { components } => Domain::new(components.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annulus_orientation_is_domain_left() {
        let d = Domain::annulus(0.4).unwrap();
        assert!(d.components()[0].signed_area() > 0.0);
        assert!(d.components()[1].signed_area() < 0.0);
        // inner normal points to the origin, i.e. out of the annulus
        let nu = d.components()[1].outward_normal(0.0);
        assert!((nu[0] + 1.0).abs() < 1e-15 && nu[1].abs() < 1e-15);
    }

    #[test]
    fn counter_clockwise_hole_is_reversed() {
        let d = Domain::new(vec![
            ParamCurve::circle([0.0, 0.0], 1.0, true, "outer").unwrap(),
            ParamCurve::circle([0.0, 0.0], 0.5, true, "hole").unwrap(),
        ])
        .unwrap();
        assert!(d.components()[1].signed_area() < 0.0);
        assert!(d.components().iter().all(|c| c.orientation_hint));
    }

    #[test]
    fn rejects_holes_outside_or_overlapping() {
        let outer = ParamCurve::circle([0.0, 0.0], 1.0, true, "outer").unwrap();
        let outside = ParamCurve::circle([3.0, 0.0], 0.5, false, "far").unwrap();
        assert!(Domain::new(vec![outer.clone(), outside]).is_err());
        let a = ParamCurve::circle([0.2, 0.0], 0.3, false, "a").unwrap();
        let b = ParamCurve::circle([-0.1, 0.0], 0.3, false, "b").unwrap();
        assert!(Domain::new(vec![outer.clone(), a, b]).is_err());
        let crossing = ParamCurve::circle([0.8, 0.0], 0.5, false, "x").unwrap();
        assert!(Domain::new(vec![outer, crossing]).is_err());
    }

    #[test]
    fn spec_vocabulary_parses() {
        let d: DomainSpec = serde_json::from_str(r#"{"type":"circle","R":2.0}"#).unwrap();
        assert_eq!(d, DomainSpec::Circle { radius: 2.0 });
        let d: DomainSpec = serde_json::from_str(r#"{"type":"disk","R":1.0}"#).unwrap();
        assert!(d.build().is_ok());
        let d: DomainSpec = serde_json::from_str(r#"{"type":"annulus","r0":0.4}"#).unwrap();
        assert_eq!(d.build().unwrap().len(), 2);
        assert!(serde_json::from_str::<DomainSpec>(r#"{"type":"triangle"}"#).is_err());
    }

    #[test]
    fn containment() {
        let d = Domain::annulus(0.4).unwrap();
        assert!(d.contains([0.7, 0.0], 256));
        assert!(!d.contains([0.1, 0.0], 256));
        assert!(!d.contains([1.1, 0.0], 256));
        assert!((d.diameter() - 2.0).abs() < 1e-12);
    }
}
