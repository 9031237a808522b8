//! Restriction norms of eigenfunctions on the level sets `H_t` of the
//! boundary distance, their envelope-normalized profiles, and the margin
//! report for the lower and upper decay bounds.
//!
//! Every margin is a log-scale quantity multiplied by `h`; a margin is
//! passing when it is nonnegative.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtn::{InteriorEvaluator, SteklovSpectrum};
use crate::envelope::{q_sup, Chart, CylinderChart, EnvelopeTable, UpperBoundParams};
use crate::error::{Error, Result};
use crate::exact::{ExactEigenpair, ExactModel};
use crate::geometry::{FermiChart, Vec2};

/// A component is dominant when it carries at least this share of `‖u‖_{L²(∂Ω)}`.
pub const DOMINANCE_RATIO: f64 = 0.5;

/// Value and gradient of one eigenfunction at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldValue {
    pub value: Complex64,
    pub gradient: [Complex64; 2],
}

/// A batch of eigenfunctions that can be evaluated together.
pub trait EigenfunctionSet: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sigma(&self, i: usize) -> f64;

    /// `‖u_i‖_{L²}` on each boundary component.
    fn component_norms(&self, i: usize) -> Vec<f64>;

    /// All members at an interior point.
    fn eval(&self, p: Vec2) -> Result<Vec<FieldValue>>;

    /// All members at the boundary point `p` of component `c`, parameter `s`.
    fn eval_boundary(&self, c: usize, s: f64, p: Vec2) -> Result<Vec<FieldValue>>;
}

/// Closed-form eigenfunctions of one model.
pub struct ExactSet {
    pairs: Vec<ExactEigenpair>,
}

impl ExactSet {
    pub fn new(pairs: Vec<ExactEigenpair>) -> Result<Self> {
        let first = pairs.first().ok_or_else(|| Error::InvalidArgument("empty eigenfunction set".into()))?;
        if pairs.iter().any(|p| p.model != first.model) {
            return Err(Error::InvalidArgument("eigenpairs belong to different models".into()));
        }
        if let Some(p) = pairs.iter().find(|p| p.h().is_none()) {
            return Err(Error::Undefined(format!("h is undefined for σ = {}", p.sigma)));
        }
        Ok(Self { pairs })
    }

    pub fn model(&self) -> ExactModel {
        self.pairs[0].model
    }

    fn at(&self, p: Vec2) -> Result<Vec<FieldValue>> {
        self.pairs
            .iter()
            .map(|pair| {
                let (value, gradient) = pair.value_and_gradient(p)?;
                Ok(FieldValue { value, gradient })
            })
            .collect()
    }
}

impl EigenfunctionSet for ExactSet {
    fn len(&self) -> usize {
        self.pairs.len()
    }

    fn sigma(&self, i: usize) -> f64 {
        self.pairs[i].sigma
    }

    fn component_norms(&self, i: usize) -> Vec<f64> {
        self.pairs[i].boundary_norms()
    }

    fn eval(&self, p: Vec2) -> Result<Vec<FieldValue>> {
        self.at(p)
    }

    fn eval_boundary(&self, _c: usize, _s: f64, p: Vec2) -> Result<Vec<FieldValue>> {
        self.at(p)
    }
}

/// Nyström eigenfunctions, evaluated through layer potentials.
pub struct DtnSet {
    evaluator: InteriorEvaluator,
    sigmas: Vec<f64>,
    norms: Vec<Vec<f64>>,
}

impl DtnSet {
    /// Selects `modes` from a solved spectrum; `σ = 0` modes are refused.
    pub fn new(spectrum: &SteklovSpectrum, modes: &[usize]) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidArgument("empty eigenfunction set".into()));
        }
        let mut sigmas = Vec::with_capacity(modes.len());
        let mut norms = Vec::with_capacity(modes.len());
        let weights = spectrum.grid.weights();
        for &m in modes {
            let mode = spectrum
                .modes
                .get(m)
                .ok_or_else(|| Error::InvalidArgument(format!("mode {m} is not in the spectrum")))?;
            if mode.h().is_none() {
                return Err(Error::Undefined(format!("h is undefined for mode {m} (σ = {})", mode.sigma)));
            }
            sigmas.push(mode.sigma);
            norms.push(
                spectrum
                    .grid
                    .components
                    .iter()
                    .map(|c| {
                        let r = c.offset..c.offset + c.len();
                        mode.trace[r.clone()]
                            .iter()
                            .zip(&weights[r])
                            .map(|(v, w)| w * v * v)
                            .sum::<f64>()
                            .sqrt()
                    })
                    .collect(),
            );
        }
        Ok(Self {
            evaluator: InteriorEvaluator::from_spectrum(spectrum, modes)?,
            sigmas,
            norms,
        })
    }
}

fn lift(v: crate::dtn::PointValue) -> FieldValue {
    FieldValue {
        value: Complex64::new(v.value, 0.0),
        gradient: [Complex64::new(v.gradient[0], 0.0), Complex64::new(v.gradient[1], 0.0)],
    }
}

impl EigenfunctionSet for DtnSet {
    fn len(&self) -> usize {
        self.sigmas.len()
    }

    fn sigma(&self, i: usize) -> f64 {
        self.sigmas[i]
    }

    fn component_norms(&self, i: usize) -> Vec<f64> {
        self.norms[i].clone()
    }

    fn eval(&self, p: Vec2) -> Result<Vec<FieldValue>> {
        Ok(self.evaluator.eval(p, true)?.into_iter().map(lift).collect())
    }

    fn eval_boundary(&self, c: usize, s: f64, _p: Vec2) -> Result<Vec<FieldValue>> {
        Ok(self.evaluator.boundary(c, s)?.into_iter().map(lift).collect())
    }
}

/// The family of hypersurfaces `H_t` swept by a profile.
#[derive(Clone, Copy)]
pub enum Sweep<'a> {
    Fermi(&'a FermiChart),
    /// Flat cylinder with `n` equispaced samples along each circle.
    Cylinder(&'a CylinderChart, usize),
}

impl Sweep<'_> {
    pub fn chart(&self) -> &dyn Chart {
        match *self {
            Sweep::Fermi(c) => c,
            Sweep::Cylinder(c, _) => c,
        }
    }

    pub fn source(&self) -> &[usize] {
        match self {
            Sweep::Fermi(c) => &c.source,
            Sweep::Cylinder(c, _) => &c.source,
        }
    }
}

struct Node {
    component: usize,
    s: f64,
    point: Vec2,
    inward: Vec2,
    weight: f64,
}

/// Quadrature nodes on `H_t`; the measure includes the offset Jacobian.
fn hypersurface(sweep: Sweep<'_>, t: f64) -> Result<Vec<Node>> {
    sweep.chart().check_t(t)?;
    match sweep {
        Sweep::Fermi(chart) => {
            let ds = chart.ds();
            (0..chart.samples.len())
                .map(|j| {
                    let smp = &chart.samples[j];
                    Ok(Node {
                        component: smp.component,
                        s: smp.s,
                        point: chart.point(j, t),
                        inward: [-smp.outward_normal[0], -smp.outward_normal[1]],
                        weight: chart.jacobian_at(j, t)? * ds,
                    })
                })
                .collect()
        }
        Sweep::Cylinder(chart, n) => {
            if n == 0 {
                return Err(Error::InvalidArgument("cylinder sweep needs samples".into()));
            }
            let w = chart.length / n as f64;
            Ok(chart
                .source
                .iter()
                .flat_map(|&c| {
                    let (s, dir) = if c == 0 { (-1.0 + t, 1.0) } else { (1.0 - t, -1.0) };
                    (0..n).map(move |i| {
                        let x = chart.length * i as f64 / n as f64;
                        Node {
                            component: c,
                            s: x,
                            point: [s, x],
                            inward: [dir, 0.0],
                            weight: w,
                        }
                    })
                })
                .collect())
        }
    }
}

/// `(‖u‖_{L²(H_t)}, ‖h∂_ν u‖_{L²(H_t)})` for every member of the set.
///
/// Trapezoid rule in the chart parameter; at `t = 0` the boundary
/// evaluator is used.
pub fn restriction_norms(set: &dyn EigenfunctionSet, sweep: Sweep<'_>, t: f64) -> Result<Vec<(f64, f64)>> {
    let nodes = hypersurface(sweep, t)?;
    let hs: Vec<f64> = (0..set.len()).map(|i| 1.0 / set.sigma(i)).collect();
    let mut acc = vec![(0.0, 0.0); set.len()];
    for node in &nodes {
        let vals = if t == 0.0 {
            set.eval_boundary(node.component, node.s, node.point)?
        } else {
            set.eval(node.point)?
        };
        for (i, v) in vals.iter().enumerate() {
            let dn = v.gradient[0] * node.inward[0] + v.gradient[1] * node.inward[1];
            acc[i].0 += node.weight * v.value.norm_sqr();
            acc[i].1 += node.weight * hs[i] * hs[i] * dn.norm_sqr();
        }
    }
    Ok(acc.into_iter().map(|(u, d)| (u.sqrt(), d.sqrt())).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictionProfile {
    pub chart: String,
    pub source: Vec<usize>,
    /// Number of boundary components of the domain.
    pub n_components: usize,
    pub sigma: f64,
    pub h: f64,
    pub t: Vec<f64>,
    pub norm_u: Vec<f64>,
    pub norm_dn: Vec<f64>,
    /// `‖u‖_{L²(N)}` over the source components.
    pub ref_component_norm: f64,
    /// `‖u‖_{L²(∂Ω)}`.
    pub full_boundary_norm: f64,
}

impl RestrictionProfile {
    pub fn covers_boundary(&self) -> bool {
        self.source.len() == self.n_components
    }

    pub fn dominant(&self) -> bool {
        self.ref_component_norm >= DOMINANCE_RATIO * self.full_boundary_norm
    }
}

/// One profile per member of the set, over `t_grid`.
pub fn restriction_profiles(
    set: &dyn EigenfunctionSet,
    sweep: Sweep<'_>,
    t_grid: &[f64],
) -> Result<Vec<RestrictionProfile>> {
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("empty t grid".into()));
    }
    let rows = t_grid
        .par_iter()
        .map(|&t| restriction_norms(set, sweep, t))
        .collect::<Result<Vec<_>>>()?;
    let source = sweep.source().to_vec();
    Ok((0..set.len())
        .map(|i| {
            let norms = set.component_norms(i);
            let sq = |it: &mut dyn Iterator<Item = f64>| it.map(|n| n * n).sum::<f64>().sqrt();
            RestrictionProfile {
                chart: sweep.chart().id(),
                n_components: norms.len(),
                ref_component_norm: sq(&mut source.iter().map(|&c| norms[c])),
                full_boundary_norm: sq(&mut norms.iter().copied()),
                source: source.clone(),
                sigma: set.sigma(i),
                h: 1.0 / set.sigma(i),
                t: t_grid.to_vec(),
                norm_u: rows.iter().map(|r| r[i].0).collect(),
                norm_dn: rows.iter().map(|r| r[i].1).collect(),
            }
        })
        .collect())
}

fn psi_on(envelope: &EnvelopeTable, t: f64) -> Result<f64> {
    envelope
        .psi_at(t)
        .ok_or_else(|| Error::InvalidArgument(format!("t = {t} is outside the envelope grid of {}", envelope.chart)))
}

/// `R(t) = h log(‖u‖_{L²(H_t)}/‖u‖_{L²(N)}) + ψ_N(t)`.
pub fn normalized_profile(profile: &RestrictionProfile, envelope: &EnvelopeTable) -> Result<Vec<f64>> {
    if !(profile.ref_component_norm > 0.0) {
        return Err(Error::ZeroReference);
    }
    profile
        .t
        .iter()
        .zip(&profile.norm_u)
        .map(|(&t, &n)| Ok(profile.h * (n / profile.ref_component_norm).ln() + psi_on(envelope, t)?))
        .collect()
}

/// Tolerances for [`check_bounds`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub upper: UpperBoundParams,
    /// Additive slack on the lower-bound margins.
    pub eps_tol: f64,
    /// Quadratic coefficient replacing ψ in the near-boundary lower bound.
    pub c1: f64,
    /// Multiple of `h` allowed above the upper envelope.
    pub c_up: f64,
}

impl BoundParams {
    pub const DEFAULT_EPS_TOL: f64 = 0.05;
    pub const DEFAULT_C_UP: f64 = 1.0;

    /// `c1 = Q_sup(0)/2 + 1/2`, the upper-envelope defaults of the chart.
    pub fn defaults_for(chart: &dyn Chart) -> Result<Self> {
        Ok(Self {
            upper: UpperBoundParams::defaults_for(chart)?,
            eps_tol: Self::DEFAULT_EPS_TOL,
            c1: 0.5 * q_sup(chart, 0.0)? + 0.5,
            c_up: Self::DEFAULT_C_UP,
        })
    }

    pub fn validate(&self, chart: &dyn Chart) -> Result<()> {
        self.upper.validate(chart)?;
        // c1 < 0 is legitimate on concave sources, where ψ bends below t
        if !self.c1.is_finite() {
            return Err(Error::InvalidArgument(format!("c1 must be finite, got {}", self.c1)));
        }
        for (name, v) in [("eps_tol", self.eps_tol), ("c_up", self.c_up)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Margin curves for one eigenfunction on one chart. `None` marks a sample
/// where the margin is not defined (beyond `ε0`, or outside the full chart).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub chart: String,
    pub sigma: f64,
    pub h: f64,
    pub params: BoundParams,
    pub dominant: bool,
    pub t: Vec<f64>,
    pub norm_u: Vec<f64>,
    pub norm_dn: Vec<f64>,
    pub psi: Vec<f64>,
    #[serde(rename = "R")]
    pub r: Vec<f64>,
    pub m1: Vec<Option<f64>>,
    pub m2: Vec<f64>,
    pub m3: Vec<Option<f64>>,
    pub m_up: Vec<Option<f64>>,
    /// Lower and upper checks apply to dominant components only.
    pub pass_m1: Option<bool>,
    pub pass_m2: Option<bool>,
    /// `None` when no full-boundary profile was supplied.
    pub pass_m3: Option<bool>,
    pub pass_up: Option<bool>,
}

impl BoundReport {
    /// No applicable check failed.
    pub fn passed(&self) -> bool {
        [self.pass_m1, self.pass_m2, self.pass_m3, self.pass_up]
            .iter()
            .all(|p| p.unwrap_or(true))
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        let mut out = String::from("t,norm_u,norm_dn,psi,R,m1,m2,m3,m_up\n");
        for i in 0..self.t.len() {
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.12e},{},{}",
                self.t[i],
                self.norm_u[i],
                self.norm_dn[i],
                self.psi[i],
                self.r[i],
                opt(self.m1[i]),
                self.m2[i],
                opt(self.m3[i]),
                opt(self.m_up[i]),
            )
            .expect("write to string");
        }
        out
    }
}

fn all_nonnegative<'a>(it: impl IntoIterator<Item = &'a Option<f64>>) -> bool {
    it.into_iter().flatten().all(|&m| m >= 0.0)
}

/// Margins of one profile.
///
/// `full` carries the profile and envelope of the chart about the whole
/// boundary for the Cauchy-data margin; it may be omitted when `profile`
/// already covers every component. Failed inequalities are report
/// entries, not errors.
pub fn check_bounds(
    profile: &RestrictionProfile,
    envelope: &EnvelopeTable,
    full: Option<(&RestrictionProfile, &EnvelopeTable)>,
    params: &BoundParams,
) -> Result<BoundReport> {
    let r = normalized_profile(profile, envelope)?;
    let psi: Vec<f64> = profile.t.iter().map(|&t| psi_on(envelope, t)).collect::<Result<_>>()?;
    let h = profile.h;
    let log_ratio: Vec<f64> = r.iter().zip(&psi).map(|(r, p)| r - p).collect();
    let eps0 = params.upper.epsilon0;

    let m2: Vec<f64> = r.iter().map(|r| r + params.eps_tol).collect();
    let m1: Vec<Option<f64>> = profile
        .t
        .iter()
        .zip(&log_ratio)
        .map(|(&t, lr)| (t <= eps0).then(|| lr + t + params.c1 * t * t + params.eps_tol))
        .collect();
    let m_up: Vec<Option<f64>> = profile
        .t
        .iter()
        .zip(&log_ratio)
        .map(|(&t, lr)| (t <= eps0).then(|| -t + params.upper.c_sup * t * t - lr + params.c_up * h))
        .collect();

    let full = match full {
        Some(f) => Some(f),
        None if profile.covers_boundary() => Some((profile, envelope)),
        None => None,
    };
    let m3: Vec<Option<f64>> = match full {
        None => vec![None; profile.t.len()],
        Some((fp, fe)) => {
            if !(fp.full_boundary_norm > 0.0) {
                return Err(Error::ZeroReference);
            }
            profile
                .t
                .iter()
                .map(|&t| {
                    let Some(j) = fp.t.iter().position(|&x| x == t) else {
                        return Ok(None);
                    };
                    let cd = (fp.norm_u[j] + fp.norm_dn[j]) / fp.full_boundary_norm;
                    Ok(Some(fp.h * cd.ln() + psi_on(fe, t)? + params.eps_tol))
                })
                .collect::<Result<_>>()?
        }
    };

    let dominant = profile.dominant();
    Ok(BoundReport {
        chart: profile.chart.clone(),
        sigma: profile.sigma,
        h,
        params: *params,
        dominant,
        t: profile.t.clone(),
        norm_u: profile.norm_u.clone(),
        norm_dn: profile.norm_dn.clone(),
        pass_m1: dominant.then(|| all_nonnegative(&m1)),
        pass_m2: dominant.then(|| m2.iter().all(|&m| m >= 0.0)),
        pass_m3: full.map(|_| all_nonnegative(&m3)),
        pass_up: dominant.then(|| all_nonnegative(&m_up)),
        psi,
        r,
        m1,
        m2,
        m3,
        m_up,
    })
}

#[cfg(test)]
mod tests;
