//! Subcommand pipelines. Each one reads the config, computes, and writes
//! its artifacts; nothing is shared between runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use steklov_core::dtn::{build_nystrom_grid, steklov_solve, SteklovSpectrum};
use steklov_core::envelope::{
    carleman_weight, psi_profile, psi_taylor_coeffs, Chart, CylinderChart, EnvelopeTable,
};
use steklov_core::exact::{
    annulus_eigenpairs, cylinder_eigenpair, disk_eigenpair, Branch, ExactEigenpair, ExactModel,
};
use steklov_core::geometry::{build_fermi_chart, FermiChart};
use steklov_core::verify::{
    check_bounds, normalized_profile, restriction_profiles, BoundParams, BoundReport, DtnSet, EigenfunctionSet,
    ExactSet, RestrictionProfile, Sweep,
};

use crate::config::{Backend, DomainConfig, ExperimentConfig, Format, ModeSelection, ModeSpec, SweepConfig};
use crate::error::CliError;
use crate::plot::{render, Band, Panel, Series};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Envelope,
    Profile,
    Verify,
    Figure1,
}

/// Writes artifacts under one directory and remembers their names.
pub struct Writer {
    dir: PathBuf,
    files: Vec<String>,
}

impl Writer {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        self.write(name, &text)
    }

    pub fn finish(self) -> Vec<String> {
        self.files
    }
}

/// Runs one subcommand and returns the artifact names written under `out`.
pub fn run(cfg: &ExperimentConfig, cmd: Command, out: &Path) -> Result<Vec<String>, CliError> {
    let mut w = Writer::new(out)?;
    match cmd {
        Command::Spectrum => spectrum(cfg, &mut w)?,
        Command::Envelope => envelope(cfg, &mut w)?,
        Command::Profile => profile(cfg, &mut w)?,
        Command::Verify => verify(cfg, &mut w)?,
        Command::Figure1 => crate::figure::figure1(cfg, &mut w)?,
    }
    Ok(w.finish())
}

pub(crate) fn solve(cfg: &ExperimentConfig) -> Result<SteklovSpectrum, CliError> {
    let domain = cfg.domain.build_planar()?;
    let grid = build_nystrom_grid(&domain, cfg.solver.n)?;
    Ok(steklov_solve(&grid, cfg.solver.n_eigs)?)
}

fn spectrum(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), CliError> {
    let sp = solve(cfg)?;
    w.json("spectrum.json", &sp.to_json())?;
    if cfg.output.wants(Format::Csv) {
        for i in 0..sp.modes.len() {
            let csv = sp.density_csv(i).expect("mode index in range");
            w.write(&format!("densities/mode_{i:04}.csv"), &csv)?;
        }
    }
    Ok(())
}

pub(crate) enum ChartBox {
    Fermi(FermiChart),
    Cylinder(CylinderChart),
}

impl ChartBox {
    pub(crate) fn chart(&self) -> &dyn Chart {
        match self {
            ChartBox::Fermi(c) => c,
            ChartBox::Cylinder(c) => c,
        }
    }

    pub(crate) fn sweep(&self, n_s: usize) -> Sweep<'_> {
        match self {
            ChartBox::Fermi(c) => Sweep::Fermi(c),
            ChartBox::Cylinder(c) => Sweep::Cylinder(c, n_s),
        }
    }

    fn n_components(&self, cfg: &ExperimentConfig) -> Result<usize, CliError> {
        Ok(match self {
            ChartBox::Fermi(_) => cfg.domain.build_planar()?.len(),
            ChartBox::Cylinder(_) => 2,
        })
    }

    fn source(&self) -> &[usize] {
        match self {
            ChartBox::Fermi(c) => &c.source,
            ChartBox::Cylinder(c) => &c.source,
        }
    }
}

pub(crate) fn build_chart(cfg: &ExperimentConfig, source: &[usize], n_s: usize) -> Result<ChartBox, CliError> {
    Ok(match cfg.domain {
        DomainConfig::Cylinder { length } => ChartBox::Cylinder(CylinderChart::new(length, source)?),
        _ => ChartBox::Fermi(build_fermi_chart(&cfg.domain.build_planar()?, source, n_s, &[0.0])?),
    })
}

fn sweep_cfg(cfg: &ExperimentConfig) -> Result<&SweepConfig, CliError> {
    cfg.sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("this subcommand needs a `sweep` section".into()))
}

fn t_grid(sw: &SweepConfig, r_max: f64) -> Vec<f64> {
    let hi = sw.t_max.unwrap_or_else(|| sw.t_max_fraction.expect("validated") * r_max);
    (0..sw.n_t)
        .map(|i| sw.t_min + (hi - sw.t_min) * i as f64 / (sw.n_t - 1) as f64)
        .collect()
}

fn envelope(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), CliError> {
    let sw = sweep_cfg(cfg)?;
    let chart = build_chart(cfg, &sw.source, sw.n_s)?;
    let ch = chart.chart();
    let t = t_grid(sw, ch.r_max());
    let env = psi_profile(ch, &t)?;
    let delta = cfg.params.delta;
    let weight = carleman_weight(ch, delta, &t)?;
    let (lin, quad) = psi_taylor_coeffs(ch)?;
    let squeeze_ok = weight
        .f
        .iter()
        .zip(&weight.q_sup)
        .all(|(f, q)| f - 2.0 * q >= delta && f - 2.0 * q <= 2.0 * delta);
    if cfg.output.wants(Format::Csv) {
        w.write("envelope.csv", &weight.to_csv(&env))?;
    }
    if cfg.output.wants(Format::Json) {
        w.json(
            "envelope.json",
            &json!({
                "chart": ch.id(),
                "r_max": ch.r_max(),
                "delta": delta,
                "taylor": {"linear": lin, "quadratic": quad},
                "bracket_min": weight.bracket_min,
                "squeeze_ok": squeeze_ok,
                "t": t,
                "q_sup": env.q_sup,
                "psi": env.psi,
                "dpsi": env.dpsi,
                "f_delta": weight.f,
                "psi_delta": weight.psi_delta,
            }),
        )?;
    }
    Ok(())
}

/// The evaluated eigenfunctions with a display label each.
pub(crate) struct Selection {
    pub set: Box<dyn EigenfunctionSet>,
    pub labels: Vec<String>,
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Plus => "plus",
        Branch::Minus => "minus",
        Branch::First => "first",
        Branch::Second => "second",
        Branch::Even => "even",
        Branch::Odd => "odd",
    }
}

pub(crate) fn exact_pair(model: ExactModel, m: ModeSpec) -> Result<ExactEigenpair, CliError> {
    Ok(match model {
        ExactModel::Disk { radius } => disk_eigenpair(radius, m.k, m.branch)?,
        ExactModel::Annulus { r0 } => {
            let (a, b) = annulus_eigenpairs(m.k, r0)?;
            match m.branch {
                Branch::First => a,
                Branch::Second => b,
                other => {
                    return Err(CliError::Config(format!(
                        "annulus modes take first/second, got {}",
                        branch_name(other)
                    )))
                }
            }
        }
        ExactModel::FlatCylinder { length } => cylinder_eigenpair(length, m.k, m.branch)?,
    })
}

/// Closed-form modes with `min ≤ σ ≤ max`, in `(k, branch)` order.
fn exact_in_range(model: ExactModel, min: f64, max: f64) -> Result<Vec<ModeSpec>, CliError> {
    let branches: [Branch; 2] = match model {
        ExactModel::Disk { .. } => [Branch::Plus, Branch::Minus],
        ExactModel::Annulus { .. } => [Branch::First, Branch::Second],
        ExactModel::FlatCylinder { .. } => [Branch::Even, Branch::Odd],
    };
    let mut out = Vec::new();
    for k in 0u32.. {
        let mut lowest = f64::INFINITY;
        for b in branches {
            let m = ModeSpec { k, branch: b };
            let Ok(pair) = exact_pair(model, m) else { continue };
            lowest = lowest.min(pair.sigma);
            // disk k = 0 has one real mode
            if k == 0 && b == Branch::Minus {
                continue;
            }
            if pair.sigma > 0.0 && pair.sigma >= min && pair.sigma <= max {
                out.push(m);
            }
        }
        // every branch grows with k
        if lowest > max {
            break;
        }
    }
    Ok(out)
}

pub(crate) fn select(cfg: &ExperimentConfig, modes: &ModeSelection) -> Result<Selection, CliError> {
    let model = cfg.domain.exact_model();
    let label = |m: &ModeSpec| format!("k={} {}", m.k, branch_name(m.branch));
    match cfg.solver.backend {
        Backend::Exact => {
            let model = model.expect("validated");
            let specs = match modes {
                ModeSelection::Explicit(v) => v.clone(),
                ModeSelection::SigmaRange { min, max } => exact_in_range(model, *min, *max)?,
                ModeSelection::Indices(_) => {
                    return Err(CliError::Config("modes.indices needs the dtn backend".into()))
                }
            };
            if specs.is_empty() {
                return Err(CliError::Config("no modes selected".into()));
            }
            let pairs = specs.iter().map(|m| exact_pair(model, *m)).collect::<Result<Vec<_>, _>>()?;
            Ok(Selection {
                set: Box::new(ExactSet::new(pairs)?),
                labels: specs.iter().map(label).collect(),
            })
        }
        Backend::Dtn => {
            let sp = solve(cfg)?;
            let (idx, labels) = dtn_indices(&sp, model, modes)?;
            Ok(Selection {
                set: Box::new(DtnSet::new(&sp, &idx)?),
                labels,
            })
        }
    }
}

/// Relative gap allowed between a closed-form σ and the matched computed one.
const MATCH_TOL: f64 = 1e-6;

pub(crate) fn dtn_indices(
    sp: &SteklovSpectrum,
    model: Option<ExactModel>,
    modes: &ModeSelection,
) -> Result<(Vec<usize>, Vec<String>), CliError> {
    let n = sp.modes.len();
    let (idx, labels): (Vec<usize>, Vec<String>) = match modes {
        ModeSelection::Indices(v) => {
            if let Some(&bad) = v.iter().find(|&&i| i >= n) {
                return Err(CliError::Config(format!("mode index {bad} exceeds the {n} computed modes")));
            }
            (v.clone(), v.iter().map(|i| format!("mode {i}")).collect())
        }
        ModeSelection::SigmaRange { min, max } => {
            let idx: Vec<usize> = (0..n)
                .filter(|&i| {
                    let s = sp.modes[i].sigma;
                    s > 0.0 && s >= *min && s <= *max
                })
                .collect();
            if idx.last() == Some(&(n - 1)) {
                return Err(CliError::Config(format!(
                    "sigma range reaches the last computed mode; raise solver.n_eigs above {n}"
                )));
            }
            let labels = idx.iter().map(|i| format!("mode {i}")).collect();
            (idx, labels)
        }
        ModeSelection::Explicit(v) => {
            let model = model.ok_or_else(|| CliError::Config("explicit (k, branch) modes need a closed-form domain".into()))?;
            let mut used = vec![false; n];
            let mut idx = Vec::new();
            for m in v {
                let target = exact_pair(model, *m)?.sigma;
                let best = (0..n)
                    .filter(|&i| !used[i])
                    .min_by(|&a, &b| {
                        (sp.modes[a].sigma - target).abs().total_cmp(&(sp.modes[b].sigma - target).abs())
                    })
                    .ok_or_else(|| CliError::Config("more explicit modes than computed modes".into()))?;
                if (sp.modes[best].sigma - target).abs() > MATCH_TOL * target.max(1.0) {
                    return Err(CliError::Config(format!(
                        "no computed mode near σ = {target} (k = {}); raise solver.n_eigs or N",
                        m.k
                    )));
                }
                used[best] = true;
                idx.push(best);
            }
            (idx, v.iter().map(|m| format!("k={} {}", m.k, branch_name(m.branch))).collect())
        }
    };
    if idx.is_empty() {
        return Err(CliError::Config("no modes selected".into()));
    }
    Ok((idx, labels))
}

fn modes_cfg(cfg: &ExperimentConfig) -> Result<&ModeSelection, CliError> {
    cfg.modes
        .as_ref()
        .ok_or_else(|| CliError::Config("this subcommand needs a `modes` section".into()))
}

struct Profiles {
    chart: ChartBox,
    t: Vec<f64>,
    envelope: EnvelopeTable,
    labels: Vec<String>,
    profiles: Vec<RestrictionProfile>,
    r: Vec<Vec<f64>>,
    /// Profiles and envelope about the whole boundary, when `N` is a proper subset.
    full: Option<(ChartBox, EnvelopeTable, Vec<RestrictionProfile>)>,
}

fn compute_profiles(cfg: &ExperimentConfig, with_full: bool) -> Result<Profiles, CliError> {
    let sw = sweep_cfg(cfg)?;
    let sel = select(cfg, modes_cfg(cfg)?)?;
    let chart = build_chart(cfg, &sw.source, sw.n_s)?;
    let t = t_grid(sw, chart.chart().r_max());
    let profiles = restriction_profiles(sel.set.as_ref(), chart.sweep(sw.n_s), &t)?;
    let envelope = psi_profile(chart.chart(), &t)?;
    let r = profiles
        .iter()
        .map(|p| normalized_profile(p, &envelope))
        .collect::<Result<Vec<_>, _>>()?;
    let n_comp = chart.n_components(cfg)?;
    let full = if with_full && chart.source().len() < n_comp {
        let all: Vec<usize> = (0..n_comp).collect();
        let fc = build_chart(cfg, &all, sw.n_s)?;
        let ft: Vec<f64> = t.iter().copied().filter(|&x| x < fc.chart().r_max()).collect();
        if ft.is_empty() {
            None
        } else {
            let fp = restriction_profiles(sel.set.as_ref(), fc.sweep(sw.n_s), &ft)?;
            let fe = psi_profile(fc.chart(), &ft)?;
            Some((fc, fe, fp))
        }
    } else {
        None
    };
    Ok(Profiles {
        chart,
        t,
        envelope,
        labels: sel.labels,
        profiles,
        r,
        full,
    })
}

fn profile(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), CliError> {
    let p = compute_profiles(cfg, false)?;
    if cfg.output.wants(Format::Csv) {
        let mut csv = String::from("mode,label,sigma,h,t,norm_u,norm_dn,psi,R\n");
        for (i, prof) in p.profiles.iter().enumerate() {
            for j in 0..p.t.len() {
                writeln!(
                    csv,
                    "{i},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                    p.labels[i], prof.sigma, prof.h, p.t[j], prof.norm_u[j], prof.norm_dn[j], p.envelope.psi[j], p.r[i][j]
                )
                .unwrap();
            }
        }
        w.write("profile.csv", &csv)?;
    }
    if cfg.output.wants(Format::Json) {
        let items: Vec<Value> = p
            .profiles
            .iter()
            .enumerate()
            .map(|(i, prof)| {
                json!({
                    "label": p.labels[i],
                    "sigma": prof.sigma,
                    "h": prof.h,
                    "dominant": prof.dominant(),
                    "ref_component_norm": prof.ref_component_norm,
                    "full_boundary_norm": prof.full_boundary_norm,
                    "norm_u": prof.norm_u,
                    "norm_dn": prof.norm_dn,
                    "R": p.r[i],
                })
            })
            .collect();
        w.json(
            "profile.json",
            &json!({
                "chart": p.chart.chart().id(),
                "r_max": p.chart.chart().r_max(),
                "t": p.t,
                "psi": p.envelope.psi,
                "profiles": items,
            }),
        )?;
    }
    if cfg.output.wants(Format::Svg) {
        let eps = cfg.params.eps_tol;
        let panels: Vec<Panel> = p
            .profiles
            .iter()
            .enumerate()
            .map(|(i, prof)| profile_panel(&p.labels[i], prof, &p.envelope, eps))
            .collect();
        w.write("profile.svg", &render(&panels)?)?;
    }
    Ok(())
}

/// `‖u‖_{L²(H_t)}/‖u‖_{L²(N)}` against `e^{−ψ/h}` with the `eps_tol` band.
pub(crate) fn profile_panel(label: &str, prof: &RestrictionProfile, env: &EnvelopeTable, eps: f64) -> Panel {
    let h = prof.h;
    let ratio: Vec<f64> = prof.norm_u.iter().map(|n| n / prof.ref_component_norm).collect();
    let bound = |shift: f64| -> Vec<f64> { env.psi.iter().map(|psi| ((-psi + shift) / h).exp()).collect() };
    Panel {
        title: format!("{label} on {}", prof.chart),
        x_label: "t".into(),
        y_label: "‖u‖_{L²(H_t)} / ‖u‖_{L²(N)}".into(),
        log_y: true,
        series: vec![
            Series::line("restriction norm", prof.t.clone(), ratio, "#1f77b4"),
            Series::line("e^{−ψ(t)/h}", prof.t.clone(), bound(0.0), "black").thick(),
        ],
        bands: vec![Band {
            label: format!("±eps_tol = {eps}"),
            x: prof.t.clone(),
            lo: bound(-eps),
            hi: bound(eps),
            color: "#888888",
        }],
        notes: vec![format!("σ = {:.6}", prof.sigma), format!("h = {:.6}", h)],
    }
}

#[derive(Serialize)]
struct LabeledReport<'a> {
    label: &'a str,
    #[serde(flatten)]
    report: &'a BoundReport,
}

fn bound_params(cfg: &ExperimentConfig, chart: &dyn Chart) -> Result<BoundParams, CliError> {
    let mut p = BoundParams::defaults_for(chart)?;
    let c = &cfg.params;
    p.eps_tol = c.eps_tol;
    if let Some(v) = c.c_sup {
        p.upper.c_sup = v;
    }
    if let Some(v) = c.epsilon0 {
        p.upper.epsilon0 = v;
    }
    if let Some(v) = c.c1 {
        p.c1 = v;
    }
    if let Some(v) = c.c_up {
        p.c_up = v;
    }
    p.validate(chart)?;
    Ok(p)
}

fn verify(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(), CliError> {
    let p = compute_profiles(cfg, true)?;
    let params = bound_params(cfg, p.chart.chart())?;
    let reports = p
        .profiles
        .iter()
        .enumerate()
        .map(|(i, prof)| {
            let full = p.full.as_ref().map(|(_, fe, fp)| (&fp[i], fe));
            check_bounds(prof, &p.envelope, full, &params)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let failed: Vec<&str> = reports
        .iter()
        .zip(&p.labels)
        .filter(|(r, _)| !r.passed())
        .map(|(_, l)| l.as_str())
        .collect();
    if cfg.output.wants(Format::Json) {
        let items: Vec<LabeledReport> = reports
            .iter()
            .zip(&p.labels)
            .map(|(report, label)| LabeledReport { label, report })
            .collect();
        w.json(
            "report.json",
            &json!({
                "chart": p.chart.chart().id(),
                "full_chart": p.full.as_ref().map(|(c, _, _)| c.chart().id()),
                "r_max": p.chart.chart().r_max(),
                "params": params,
                "reports": items,
                "summary": {
                    "n_reports": reports.len(),
                    "n_dominant": reports.iter().filter(|r| r.dominant).count(),
                    "all_passed": failed.is_empty(),
                    "failed": failed,
                },
            }),
        )?;
    }
    if cfg.output.wants(Format::Csv) {
        let mut csv = String::from("label,sigma,");
        for (i, r) in reports.iter().enumerate() {
            let body = r.to_csv();
            let mut lines = body.lines();
            let header = lines.next().expect("csv header");
            if i == 0 {
                csv.push_str(header);
                csv.push('\n');
            }
            for l in lines {
                writeln!(csv, "{},{:.12e},{l}", p.labels[i], r.sigma).unwrap();
            }
        }
        w.write("report.csv", &csv)?;
    }
    if cfg.output.wants(Format::Svg) {
        let panels: Vec<Panel> = p
            .profiles
            .iter()
            .enumerate()
            .map(|(i, prof)| profile_panel(&p.labels[i], prof, &p.envelope, params.eps_tol))
            .collect();
        w.write("profile.svg", &render(&panels)?)?;
    }
    Ok(())
}
