//! Radial amplitude of annulus eigenfunctions against the lower-bound curve
//! `e^{−ψ(t)/h}‖u‖_{L²(N)}/√|N|`, with `N` the dominant boundary circle.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde_json::{json, Value};
use steklov_core::envelope::psi_profile;
use steklov_core::exact::Branch;
use steklov_core::geometry::{build_fermi_chart, Domain};

use crate::config::{DomainConfig, ExperimentConfig, Format, ModeSelection, ModeSpec};
use crate::error::CliError;
use crate::pipeline::{select, Writer};
use crate::plot::{render, Panel, Series};

/// Radial samples between `r0 + R_GAP` and `R_OUTER`.
pub const N_RADII: usize = 120;
/// Angular samples per circle for the max and the `L²` norm.
pub const N_ANGLES: usize = 512;
pub const R_GAP: f64 = 0.01;
pub const R_OUTER: f64 = 0.99;
/// The amplitude must stay above this fraction of the curve on the checked range.
pub const RATIO_FLOOR: f64 = 0.9;
/// Upper end of the checked radial range.
pub const R_CHECK_MAX: f64 = 0.9;

pub fn default_modes() -> ModeSelection {
    ModeSelection::Explicit(vec![
        ModeSpec { k: 20, branch: Branch::First },
        ModeSpec { k: 8, branch: Branch::Second },
    ])
}

fn title(m: &ModeSelection, i: usize, fallback: &str) -> String {
    match m {
        ModeSelection::Explicit(v) => match v[i].branch {
            Branch::First => format!("σ_{{{},1}}", v[i].k),
            Branch::Second => format!("σ_{{{},2}}", v[i].k),
            _ => fallback.to_string(),
        },
        _ => fallback.to_string(),
    }
}

/// One panel's worth of radial data.
#[derive(Clone, Debug)]
pub struct RadialProfile {
    pub label: String,
    pub sigma: f64,
    pub h: f64,
    /// Dominant boundary component (0 outer, 1 inner).
    pub source: usize,
    pub ref_norm: f64,
    pub r: Vec<f64>,
    pub max_abs_u: Vec<f64>,
    pub rms_u: Vec<f64>,
    pub lower: Vec<f64>,
    pub min_ratio: f64,
}

impl RadialProfile {
    pub fn ratio_ok(&self) -> bool {
        self.min_ratio >= RATIO_FLOOR
    }
}

pub fn radial_profiles(cfg: &ExperimentConfig) -> Result<Vec<RadialProfile>, CliError> {
    let DomainConfig::Annulus { r0 } = cfg.domain else {
        return Err(CliError::Config("figure1 needs an annulus domain".into()));
    };
    let modes = cfg.modes.clone().unwrap_or_else(default_modes);
    let sel = select(cfg, &modes)?;
    let set = sel.set.as_ref();
    let r: Vec<f64> = (0..N_RADII)
        .map(|i| r0 + R_GAP + (R_OUTER - r0 - R_GAP) * i as f64 / (N_RADII - 1) as f64)
        .collect();
    // per radius: (max |u|, Σ|u|²) for every mode
    let rows = r
        .par_iter()
        .map(|&rad| {
            let mut max = vec![0.0f64; set.len()];
            let mut sq = vec![0.0f64; set.len()];
            for j in 0..N_ANGLES {
                let th = TAU * j as f64 / N_ANGLES as f64;
                let vals = set.eval([rad * th.cos(), rad * th.sin()])?;
                for (i, v) in vals.iter().enumerate() {
                    let a = v.value.norm();
                    max[i] = max[i].max(a);
                    sq[i] += a * a;
                }
            }
            Ok((max, sq))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let domain = Domain::annulus(r0)?;
    let mut out = Vec::new();
    for i in 0..set.len() {
        let norms = set.component_norms(i);
        let source = if norms[0] >= norms[1] { 0 } else { 1 };
        let radius = if source == 0 { 1.0 } else { r0 };
        let h = 1.0 / set.sigma(i);
        let t: Vec<f64> = r.iter().map(|&x| if source == 0 { 1.0 - x } else { x - r0 }).collect();
        let mut sorted = t.clone();
        sorted.sort_by(f64::total_cmp);
        let chart = build_fermi_chart(&domain, &[source], 64, &[0.0])?;
        let env = psi_profile(&chart, &sorted)?;
        let psi_at = |x: f64| env.psi[sorted.partition_point(|&v| v < x)];
        let scale = norms[source] / (TAU * radius).sqrt();
        let lower: Vec<f64> = t.iter().map(|&x| (-psi_at(x) / h).exp() * scale).collect();
        let max_abs_u: Vec<f64> = rows.iter().map(|row| row.0[i]).collect();
        let rms_u: Vec<f64> = rows.iter().map(|row| (row.1[i] / N_ANGLES as f64).sqrt()).collect();
        let min_ratio = r
            .iter()
            .zip(max_abs_u.iter().zip(&lower))
            .filter(|(&x, _)| x <= R_CHECK_MAX)
            .map(|(_, (u, l))| u / l)
            .fold(f64::INFINITY, f64::min);
        out.push(RadialProfile {
            label: title(&modes, i, &sel.labels[i]),
            sigma: set.sigma(i),
            h,
            source,
            ref_norm: norms[source],
            r: r.clone(),
            max_abs_u,
            rms_u,
            lower,
            min_ratio,
        });
    }
    Ok(out)
}

pub fn figure_panels(profiles: &[RadialProfile]) -> Vec<Panel> {
    profiles
        .iter()
        .map(|p| Panel {
            title: p.label.clone(),
            x_label: "r".into(),
            y_label: "|u(r)|".into(),
            log_y: true,
            series: vec![
                Series::line("max_{θ} |u(r, θ)|", p.r.clone(), p.max_abs_u.clone(), "#1f77b4"),
                Series::line("RMS over θ", p.r.clone(), p.rms_u.clone(), "#999999").dashed(),
                Series::line("lower bound", p.r.clone(), p.lower.clone(), "black").thick(),
            ],
            bands: vec![],
            notes: vec![
                format!("σ = {:.6}", p.sigma),
                format!("h = {:.6}", p.h),
                format!("N = {} circle", if p.source == 0 { "outer" } else { "inner" }),
            ],
        })
        .collect()
}

pub fn figure1(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), CliError> {
    let profiles = radial_profiles(cfg)?;
    if cfg.output.wants(Format::Svg) {
        w.write("figure1.svg", &render(&figure_panels(&profiles))?)?;
    }
    if cfg.output.wants(Format::Csv) {
        let mut csv = String::from("panel,r,max_abs_u,rms_u,lower_bound\n");
        for p in &profiles {
            for j in 0..p.r.len() {
                writeln!(
                    csv,
                    "{},{:.12e},{:.12e},{:.12e},{:.12e}",
                    p.label, p.r[j], p.max_abs_u[j], p.rms_u[j], p.lower[j]
                )
                .unwrap();
            }
        }
        w.write("figure1.csv", &csv)?;
    }
    if cfg.output.wants(Format::Json) {
        let panels: Vec<Value> = profiles
            .iter()
            .map(|p| {
                json!({
                    "label": p.label,
                    "sigma": p.sigma,
                    "h": p.h,
                    "source_component": p.source,
                    "ref_norm": p.ref_norm,
                    "check_range": [p.r[0], R_CHECK_MAX],
                    "ratio_floor": RATIO_FLOOR,
                    "min_ratio": p.min_ratio,
                    "ratio_ok": p.ratio_ok(),
                    "r": p.r,
                    "max_abs_u": p.max_abs_u,
                    "rms_u": p.rms_u,
                    "lower_bound": p.lower,
                })
            })
            .collect();
        w.json("figure1.json", &json!({ "panels": panels }))?;
    }
    Ok(())
}
