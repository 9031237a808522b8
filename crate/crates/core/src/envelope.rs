//! Decay envelopes in Fermi coordinates.
//!
//! With `Q(t, s) = κ(s)/(1 − tκ(s))`, the lower envelope is
//! `ψ(t) = ∫_0^t exp(∫_0^τ Q_sup) dτ`, the Carleman weight replaces `Q_sup`
//! by `½f_δ` with `f_δ = 2Q_sup + 1.5δ`, and the upper envelope is
//! `exp((−t + c_sup t²)/h)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FermiChart;

/// Smallest number of fine intervals in the nested quadrature.
const MIN_FINE: usize = 512;
/// Refinement stops once doubling moves no sample by more than this.
const REFINE_TOL: f64 = 1e-11;
const MAX_DOUBLINGS: u32 = 14;

/// Tube about boundary components with known curvature samples.
pub trait Chart: Sync {
    fn id(&self) -> String;
    fn r_max(&self) -> f64;
    /// Signed curvature at every chart sample.
    fn kappas(&self) -> Vec<f64>;

    fn check_t(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t < self.r_max()) {
            return Err(Error::ChartExceeded { t, r_max: self.r_max() });
        }
        Ok(())
    }
}

impl Chart for FermiChart {
    fn id(&self) -> String {
        FermiChart::id(self)
    }

    fn r_max(&self) -> f64 {
        self.r_max
    }

    fn kappas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.kappa).collect()
    }
}

/// Flat cylinder `(−1, 1) × ℝ/Lℤ` about one or both end circles.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CylinderChart {
    pub length: f64,
    /// 0 is `s = −1`, 1 is `s = +1`.
    pub source: Vec<usize>,
}

impl CylinderChart {
    pub fn new(length: f64, source: &[usize]) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::InvalidArgument(format!("cylinder length must be positive, got {length}")));
        }
        if source.is_empty() {
            return Err(Error::EmptySource);
        }
        if source.iter().any(|&c| c > 1) {
            return Err(Error::InvalidArgument("cylinder components are 0 and 1".into()));
        }
        let mut source = source.to_vec();
        source.sort_unstable();
        source.dedup();
        Ok(Self { length, source })
    }
}

impl Chart for CylinderChart {
    fn id(&self) -> String {
        self.source
            .iter()
            .map(|&c| if c == 0 { "left" } else { "right" })
            .collect::<Vec<_>>()
            .join("+")
    }

    /// Distance to the opposite circle, or to the midline when both are sources.
    fn r_max(&self) -> f64 {
        if self.source.len() == 2 {
            1.0
        } else {
            2.0
        }
    }

    fn kappas(&self) -> Vec<f64> {
        vec![0.0]
    }
}

fn q_from_kappas(kappas: &[f64], t: f64) -> f64 {
    kappas.iter().map(|&k| k / (1.0 - t * k)).fold(f64::NEG_INFINITY, f64::max)
}

/// `Q_sup(t) = max_s κ(s)/(1 − tκ(s))`.
pub fn q_sup(chart: &dyn Chart, t: f64) -> Result<f64> {
    chart.check_t(t)?;
    Ok(q_from_kappas(&chart.kappas(), t))
}

/// `ψ(t) = ∫_0^t exp(∫_0^τ rate) dτ` and `ψ'(t)` at each of `t_grid`.
///
/// Every gap between consecutive grid points is split into `2m` intervals;
/// the inner integral is Simpson per interval (midpoints), the outer is
/// composite Simpson over interval pairs, so grid points are exact nodes.
fn nested_quadrature(rate: &dyn Fn(f64) -> f64, t_grid: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let run = |m: usize| -> (Vec<f64>, Vec<f64>) {
        let mut psi = Vec::with_capacity(t_grid.len());
        let mut dpsi = Vec::with_capacity(t_grid.len());
        let (mut t0, mut inner, mut outer) = (0.0f64, 0.0f64, 0.0f64);
        for &t1 in t_grid {
            let n = 2 * m;
            let h = (t1 - t0) / n as f64;
            let mut prev = inner.exp();
            let mut vals = Vec::with_capacity(n + 1);
            vals.push(prev);
            for i in 0..n {
                let a = t0 + i as f64 * h;
                inner += h / 6.0 * (rate(a) + 4.0 * rate(a + 0.5 * h) + rate(a + h));
                prev = inner.exp();
                vals.push(prev);
            }
            for pair in 0..m {
                let (a, b, c) = (vals[2 * pair], vals[2 * pair + 1], vals[2 * pair + 2]);
                outer += h / 3.0 * (a + 4.0 * b + c);
            }
            psi.push(outer);
            dpsi.push(prev);
            t0 = t1;
        }
        (psi, dpsi)
    };
    let mut m = 1;
    while 2 * m * t_grid.len() < MIN_FINE {
        m *= 2;
    }
    let mut cur = run(m);
    for _ in 0..MAX_DOUBLINGS {
        m *= 2;
        let next = run(m);
        let change = cur.0.iter().zip(&next.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        cur = next;
        if change <= REFINE_TOL {
            break;
        }
    }
    cur
}

fn validate_grid(chart: &dyn Chart, t_grid: &[f64]) -> Result<()> {
    for &t in t_grid {
        chart.check_t(t)?;
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("t_grid must be non-decreasing".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeTable {
    pub chart: String,
    pub t_grid: Vec<f64>,
    pub q_sup: Vec<f64>,
    pub psi: Vec<f64>,
    /// `ψ'(t) = exp(∫_0^t Q_sup)`.
    pub dpsi: Vec<f64>,
}

impl EnvelopeTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,q_sup,psi\n");
        for i in 0..self.t_grid.len() {
            writeln!(out, "{:.17e},{:.17e},{:.17e}", self.t_grid[i], self.q_sup[i], self.psi[i]).expect("write to string");
        }
        out
    }

    /// Linear interpolation of ψ; `t` must lie in the grid's range.
    pub fn psi_at(&self, t: f64) -> Option<f64> {
        interp(&self.t_grid, &self.psi, t)
    }
}

pub(crate) fn interp(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let i = xs.iter().position(|&v| v >= x)?;
    if xs[i] == x || i == 0 {
        return (xs[i] == x).then_some(ys[i]);
    }
    let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    Some(ys[i - 1] * (1.0 - w) + ys[i] * w)
}

pub fn psi_profile(chart: &dyn Chart, t_grid: &[f64]) -> Result<EnvelopeTable> {
    validate_grid(chart, t_grid)?;
    let kappas = chart.kappas();
    let rate = |t: f64| q_from_kappas(&kappas, t);
    let (psi, dpsi) = nested_quadrature(&rate, t_grid);
    Ok(EnvelopeTable {
        chart: chart.id(),
        t_grid: t_grid.to_vec(),
        q_sup: t_grid.iter().map(|&t| rate(t)).collect(),
        psi,
        dpsi,
    })
}

/// `(1, Q_sup(0)/2)`: the Taylor coefficients of ψ at the boundary.
pub fn psi_taylor_coeffs(chart: &dyn Chart) -> Result<(f64, f64)> {
    Ok((1.0, 0.5 * q_sup(chart, 0.0)?))
}

/// Midpoint of the admissible band `δ ≤ f_δ − 2Q_sup ≤ 2δ`.
pub fn carleman_f_delta(chart: &dyn Chart, delta: f64, t: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be non-negative, got {delta}")));
    }
    Ok(2.0 * q_sup(chart, t)? + 1.5 * delta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlemanWeight {
    pub chart: String,
    pub delta: f64,
    pub t_grid: Vec<f64>,
    pub q_sup: Vec<f64>,
    pub f: Vec<f64>,
    pub psi_delta: Vec<f64>,
    pub dpsi_delta: Vec<f64>,
    /// `ψ_δ''(0) = ½ f_δ(0)`.
    pub d2psi0: f64,
    /// Minimum of the Poisson bracket over the characteristic samples.
    pub bracket_min: f64,
}

impl CarlemanWeight {
    pub fn to_csv(&self, envelope: &EnvelopeTable) -> String {
        let mut out = String::from("t,q_sup,psi,f_delta,psi_delta\n");
        for i in 0..self.t_grid.len() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.t_grid[i], self.q_sup[i], envelope.psi[i], self.f[i], self.psi_delta[i]
            )
            .expect("write to string");
        }
        out
    }
}

/// Weight `ψ_δ(t) = ∫_0^t exp(½∫_0^τ f_δ) dτ` with its bracket certificate.
pub fn carleman_weight(chart: &dyn Chart, delta: f64, t_grid: &[f64]) -> Result<CarlemanWeight> {
    validate_grid(chart, t_grid)?;
    if !(delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be non-negative, got {delta}")));
    }
    let kappas = chart.kappas();
    let rate = |t: f64| q_from_kappas(&kappas, t) + 0.75 * delta;
    let (psi_delta, dpsi_delta) = nested_quadrature(&rate, t_grid);
    let q: Vec<f64> = t_grid.iter().map(|&t| q_from_kappas(&kappas, t)).collect();
    let f: Vec<f64> = q.iter().map(|q| 2.0 * q + 1.5 * delta).collect();
    let mut w = CarlemanWeight {
        chart: chart.id(),
        delta,
        t_grid: t_grid.to_vec(),
        q_sup: q,
        f,
        psi_delta,
        dpsi_delta,
        d2psi0: 0.5 * (2.0 * q_from_kappas(&kappas, 0.0) + 1.5 * delta),
        bracket_min: f64::NAN,
    };
    w.bracket_min = bracket_min(chart, &w);
    Ok(w)
}

/// `2ψ'(∂_t(ψ')² − ∂_t g)` on the characteristic set `ξ_t = 0`, `g = (ψ')²`.
///
/// With `g = ξ_s²/J²` and `J = (1 − tκ)|c'|`, `∂_t g = 2Q(t, s) g`, so the
/// bracket is `2(ψ')³(f_δ − 2Q(t, s))`.
pub fn bracket_at(dpsi: f64, f: f64, q: f64) -> f64 {
    2.0 * dpsi.powi(3) * (f - 2.0 * q)
}

pub fn bracket_min(chart: &dyn Chart, weight: &CarlemanWeight) -> f64 {
    let kappas = chart.kappas();
    let mut min = f64::INFINITY;
    for (i, &t) in weight.t_grid.iter().enumerate() {
        for &k in &kappas {
            let q = k / (1.0 - t * k);
            min = min.min(bracket_at(weight.dpsi_delta[i], weight.f[i], q));
        }
    }
    min
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundParams {
    pub c_sup: f64,
    pub epsilon0: f64,
}

impl UpperBoundParams {
    /// `c_sup = max(Q_sup(0), 0)/2`, `ε0 = r_max/2`.
    pub fn defaults_for(chart: &dyn Chart) -> Result<Self> {
        Ok(Self {
            c_sup: 0.5 * q_sup(chart, 0.0)?.max(0.0),
            epsilon0: 0.5 * chart.r_max(),
        })
    }

    pub fn validate(&self, chart: &dyn Chart) -> Result<()> {
        if !(self.epsilon0 > 0.0 && self.epsilon0 <= chart.r_max()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon0 = {} must lie in (0, r_max = {}]",
                self.epsilon0,
                chart.r_max()
            )));
        }
        if !self.c_sup.is_finite() {
            return Err(Error::InvalidArgument("c_sup must be finite".into()));
        }
        Ok(())
    }
}

/// `exp((−t + c_sup t²)/h)` for `0 ≤ t ≤ ε0`.
pub fn upper_envelope(t: f64, h: f64, params: &UpperBoundParams) -> Result<f64> {
    if t > params.epsilon0 {
        return Err(Error::OutOfValidity {
            t,
            epsilon0: params.epsilon0,
        });
    }
    if !(t >= 0.0) || !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("need t ≥ 0 and h > 0, got t = {t}, h = {h}")));
    }
    Ok(((-t + params.c_sup * t * t) / h).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_fermi_chart, Domain};
    use proptest::prelude::*;

    fn grid(hi: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| hi * i as f64 / n as f64).collect()
    }

    fn disk_chart() -> FermiChart {
        build_fermi_chart(&Domain::disk(1.0).unwrap(), &[0], 64, &[0.0]).unwrap()
    }

    fn annulus_inner() -> FermiChart {
        build_fermi_chart(&Domain::annulus(0.4).unwrap(), &[1], 64, &[0.0]).unwrap()
    }

    fn ellipse_chart() -> FermiChart {
        build_fermi_chart(&Domain::ellipse(2.0, 1.0).unwrap(), &[0], 256, &[0.0]).unwrap()
    }

    #[test]
    fn q_sup_examples() {
        let disk = disk_chart();
        for t in [0.0, 0.3, 0.9] {
            assert!((q_sup(&disk, t).unwrap() - 1.0 / (1.0 - t)).abs() < 1e-13);
        }
        assert!(matches!(q_sup(&disk, 1.0), Err(Error::ChartExceeded { .. })));
        let disk2 = build_fermi_chart(&Domain::disk(2.0).unwrap(), &[0], 64, &[0.0]).unwrap();
        assert!((q_sup(&disk2, 0.5).unwrap() - 1.0 / 1.5).abs() < 1e-13);
        let cyl = CylinderChart::new(3.0, &[0]).unwrap();
        assert_eq!(q_sup(&cyl, 1.5).unwrap(), 0.0);
        let inner = annulus_inner();
        for t in [0.0, 0.2, 0.5] {
            assert!((q_sup(&inner, t).unwrap() + 1.0 / (0.4 + t)).abs() < 1e-13);
        }
    }

    #[test]
    fn psi_closed_forms() {
        let t = grid(0.9, 30);
        let env = psi_profile(&disk_chart(), &t).unwrap();
        for (i, &x) in t.iter().enumerate() {
            assert!((env.psi[i] + (1.0 - x).ln()).abs() <= 1e-9, "t={x}");
        }
        let env = psi_profile(&disk_chart(), &[0.3]).unwrap();
        assert!((env.psi[0] - 0.3566749).abs() < 1e-7);

        let t = grid(0.55, 22);
        let env = psi_profile(&annulus_inner(), &t).unwrap();
        for (i, &x) in t.iter().enumerate() {
            assert!((env.psi[i] - 0.4 * (1.0 + x / 0.4).ln()).abs() <= 1e-9);
        }

        let t = grid(1.9, 19);
        let env = psi_profile(&CylinderChart::new(2.0, &[1]).unwrap(), &t).unwrap();
        for (i, &x) in t.iter().enumerate() {
            assert!((env.psi[i] - x).abs() <= 1e-12);
        }

        // ellipse: Q_sup is attained at the vertex curvature a/b²
        let ch = ellipse_chart();
        let t = grid(0.45, 15);
        let env = psi_profile(&ch, &t).unwrap();
        let k = ch.kappa_max();
        for (i, &x) in t.iter().enumerate() {
            assert!((env.psi[i] + (1.0 - x * k).ln() / k).abs() <= 1e-9);
        }
    }

    #[test]
    fn psi_invariants() {
        for (ch, hi) in [
            (Box::new(disk_chart()) as Box<dyn Chart>, 0.9),
            (Box::new(ellipse_chart()), 0.45),
            (Box::new(annulus_inner()), 0.55),
        ] {
            let t = grid(hi, 45);
            let env = psi_profile(ch.as_ref(), &t).unwrap();
            assert_eq!(env.psi[0], 0.0);
            assert!(env.psi.windows(2).all(|w| w[1] > w[0]));
            let q0 = env.q_sup[0];
            for (i, &x) in t.iter().enumerate() {
                if q0 >= 0.0 {
                    assert!(env.psi[i] >= x - 1e-15);
                } else {
                    assert!(env.psi[i] <= x + 1e-15);
                }
            }
            // finite differences at the boundary on a dedicated fine grid
            let d = 1e-3;
            let e = psi_profile(ch.as_ref(), &[0.0, d, 2.0 * d, 3.0 * d]).unwrap();
            let slope = (-11.0 * e.psi[0] + 18.0 * e.psi[1] - 9.0 * e.psi[2] + 2.0 * e.psi[3]) / (6.0 * d);
            let curv = (2.0 * e.psi[0] - 5.0 * e.psi[1] + 4.0 * e.psi[2] - e.psi[3]) / (d * d);
            let (lin, quad) = psi_taylor_coeffs(ch.as_ref()).unwrap();
            assert!((slope - lin).abs() <= 1e-6, "slope {slope}");
            assert!((curv - 2.0 * quad).abs() <= 1e-4, "curv {curv} vs {q0}");
        }
    }

    #[test]
    fn refinement_is_converged() {
        let ch = ellipse_chart();
        let t = grid(0.45, 9);
        let kappas = ch.kappas();
        let rate = |x: f64| q_from_kappas(&kappas, x);
        let (a, _) = nested_quadrature(&rate, &t);
        // a finer grid with every original point kept as a node
        let fine: Vec<f64> = grid(0.45, 18);
        let (b, _) = nested_quadrature(&rate, &fine);
        for i in 0..t.len() {
            assert!((a[i] - b[2 * i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn taylor_examples() {
        let (l, q) = psi_taylor_coeffs(&disk_chart()).unwrap();
        assert!(l == 1.0 && (q - 0.5).abs() < 1e-15);
        assert_eq!(psi_taylor_coeffs(&CylinderChart::new(1.0, &[0]).unwrap()).unwrap(), (1.0, 0.0));
        let (l, q) = psi_taylor_coeffs(&annulus_inner()).unwrap();
        assert_eq!(l, 1.0);
        assert!((q + 1.25).abs() < 1e-13);
    }

    #[test]
    fn f_delta_examples() {
        let cyl = CylinderChart::new(2.0, &[0, 1]).unwrap();
        assert!((carleman_f_delta(&cyl, 0.1, 0.5).unwrap() - 0.15).abs() < 1e-15);
        assert!((carleman_f_delta(&disk_chart(), 0.1, 0.5).unwrap() - 4.15).abs() < 1e-13);
    }

    #[test]
    fn weight_closed_forms() {
        let cyl = CylinderChart::new(2.0, &[0]).unwrap();
        let t = grid(1.5, 15);
        let w = carleman_weight(&cyl, 0.1, &t).unwrap();
        for (i, &x) in t.iter().enumerate() {
            assert!((w.psi_delta[i] - ((0.075 * x).exp() - 1.0) / 0.075).abs() <= 1e-9);
        }
        assert!((w.bracket_min - 0.3).abs() < 1e-12);

        let disk = disk_chart();
        let t = grid(0.8, 40);
        let w0 = carleman_weight(&disk, 0.0, &t).unwrap();
        let env = psi_profile(&disk, &t).unwrap();
        for i in 0..t.len() {
            assert!((w0.psi_delta[i] - env.psi[i]).abs() <= 1e-9);
        }
        let delta = 0.01;
        let w = carleman_weight(&disk, delta, &t).unwrap();
        for (i, &x) in t.iter().enumerate() {
            let gap = w.psi_delta[i] - env.psi[i];
            assert!(gap >= 0.0 && gap <= 2.0 * delta * x * env.dpsi[i]);
        }
        assert!((w.d2psi0 - 0.5 * (2.0 + 1.5 * delta)).abs() < 1e-15);
    }

    #[test]
    fn squeeze_band_and_brackets() {
        let charts: Vec<(Box<dyn Chart>, f64)> = vec![
            (Box::new(disk_chart()), 0.8),
            (Box::new(ellipse_chart()), 0.45),
            (Box::new(annulus_inner()), 0.55),
            (Box::new(build_fermi_chart(&Domain::annulus(0.4).unwrap(), &[0, 1], 64, &[0.0]).unwrap()), 0.28),
        ];
        for (ch, hi) in &charts {
            let t = grid(*hi, 32);
            for delta in [0.05, 0.1, 0.2] {
                let w = carleman_weight(ch.as_ref(), delta, &t).unwrap();
                for i in 0..t.len() {
                    let band = w.f[i] - 2.0 * w.q_sup[i];
                    assert!(band >= delta - 1e-12 && band <= 2.0 * delta + 1e-12);
                }
                let floor = delta * w.dpsi_delta.iter().cloned().fold(f64::INFINITY, f64::min).powi(3);
                assert!(w.bracket_min > 0.0 && w.bracket_min >= floor, "{} δ={delta}", ch.id());
            }
        }
        let w = carleman_weight(&disk_chart(), 0.1, &grid(0.8, 40)).unwrap();
        assert!(w.bracket_min >= 0.1);
    }

    /// Poisson bracket `{Re p_ψ, Im p_ψ}` by central differences in
    /// `(t, s, ξ_t, ξ_s)` for `p_ψ = (ξ_t + iψ')² + ξ_s²/J²`.
    fn fd_bracket(kappa: &dyn Fn(f64) -> f64, speed: &dyn Fn(f64) -> f64, dpsi: &dyn Fn(f64) -> f64, t: f64, s: f64) -> f64 {
        let g = |t: f64, s: f64, xs: f64| {
            let j = (1.0 - t * kappa(s)) * speed(s);
            xs * xs / (j * j)
        };
        let re = |v: [f64; 4]| v[2] * v[2] - dpsi(v[0]).powi(2) + g(v[0], v[1], v[3]);
        let im = |v: [f64; 4]| 2.0 * v[2] * dpsi(v[0]);
        // characteristic point: ξ_t = 0, g = ψ'²
        let j = (1.0 - t * kappa(s)) * speed(s);
        let p = [t, s, 0.0, dpsi(t) * j];
        let h = 1e-5;
        let d = |f: &dyn Fn([f64; 4]) -> f64, k: usize| {
            let (mut a, mut b) = (p, p);
            a[k] += h;
            b[k] -= h;
            (f(a) - f(b)) / (2.0 * h)
        };
        (d(&re, 2) * d(&im, 0) - d(&re, 0) * d(&im, 2)) + (d(&re, 3) * d(&im, 1) - d(&re, 1) * d(&im, 3))
    }

    #[test]
    fn bracket_matches_finite_difference_poisson_bracket() {
        let delta = 0.1;
        // disk: ψ_δ' = exp(½∫(2/(1−τ) + 1.5δ)) = e^{0.75δt}/(1 − t)
        let dpsi = |t: f64| (0.75 * delta * t).exp() / (1.0 - t);
        for &t in &[0.0, 0.2, 0.5, 0.7] {
            let fd = fd_bracket(&|_| 1.0, &|_| 1.0, &dpsi, t, 0.3);
            let f = 2.0 / (1.0 - t) + 1.5 * delta;
            let an = bracket_at(dpsi(t), f, 1.0 / (1.0 - t));
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "t={t}: {fd} vs {an}");
        }
        // ellipse: non-maximal curvature samples
        let (a, b) = (2.0f64, 1.0f64);
        let speed = |s: f64| (a * a * s.sin().powi(2) + b * b * s.cos().powi(2)).sqrt();
        let kappa = |s: f64| a * b / speed(s).powi(3);
        let kmax = a / (b * b);
        let dpsi = |t: f64| (0.75 * delta * t).exp() / (1.0 - kmax * t);
        for &(t, s) in &[(0.1, 0.0), (0.3, 0.8), (0.4, 1.57)] {
            let fd = fd_bracket(&kappa, &speed, &dpsi, t, s);
            let f = 2.0 * kmax / (1.0 - kmax * t) + 1.5 * delta;
            let an = bracket_at(dpsi(t), f, kappa(s) / (1.0 - t * kappa(s)));
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "t={t} s={s}: {fd} vs {an}");
        }
    }

    #[test]
    fn upper_envelope_examples() {
        let p = UpperBoundParams::defaults_for(&disk_chart()).unwrap();
        assert!((p.c_sup - 0.5).abs() < 1e-15 && (p.epsilon0 - 0.5).abs() < 1e-12);
        assert_eq!(upper_envelope(0.0, 0.3, &p).unwrap(), 1.0);
        assert!((upper_envelope(0.3, 0.05, &p).unwrap() - (-5.1f64).exp()).abs() < 1e-15);
        assert!(matches!(upper_envelope(0.6, 0.05, &p), Err(Error::OutOfValidity { .. })));
        let inner = UpperBoundParams::defaults_for(&annulus_inner()).unwrap();
        assert_eq!(inner.c_sup, 0.0);
        assert!(UpperBoundParams { c_sup: 0.5, epsilon0: 2.0 }.validate(&disk_chart()).is_err());
    }

    proptest! {
        #[test]
        fn upper_envelope_decreasing(c_sup in 0.0f64..3.0, h in 0.01f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let eps0 = 0.9f64.min(if c_sup > 0.0 { 0.5 / c_sup } else { 0.9 });
            let p = UpperBoundParams { c_sup, epsilon0: eps0 };
            let (lo, hi) = if a < b { (a * eps0, b * eps0) } else { (b * eps0, a * eps0) };
            prop_assert!(upper_envelope(hi, h, &p).unwrap() <= upper_envelope(lo, h, &p).unwrap());
        }

        #[test]
        fn f_delta_band(delta in 1e-4f64..1.0, t in 0.0f64..0.99) {
            static CHART: std::sync::OnceLock<FermiChart> = std::sync::OnceLock::new();
            let ch = CHART.get_or_init(disk_chart);
            let band = carleman_f_delta(ch, delta, t).unwrap() - 2.0 * q_sup(ch, t).unwrap();
            prop_assert!(band >= delta - 1e-12 && band <= 2.0 * delta + 1e-12);
        }
    }

    #[test]
    fn serialization() {
        let env = psi_profile(&disk_chart(), &grid(0.5, 5)).unwrap();
        let csv = env.to_csv();
        assert!(csv.starts_with("t,q_sup,psi\n"));
        assert_eq!(csv.lines().count(), 7);
        let back: EnvelopeTable = serde_json::from_str(&serde_json::to_string(&env).unwrap()).unwrap();
        assert_eq!(back.chart, env.chart);
        assert!(back.psi.iter().zip(&env.psi).all(|(a, b)| (a - b).abs() <= 1e-15 * b.abs()));
        let w = carleman_weight(&disk_chart(), 0.1, &grid(0.5, 5)).unwrap();
        assert!(w.to_csv(&env).starts_with("t,q_sup,psi,f_delta,psi_delta\n"));
        assert_eq!(env.psi_at(0.1), Some(env.psi[1]));
        assert!(env.psi_at(0.6).is_none());
    }
}
