//! Experiment configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steklov_core::exact::{Branch, ExactModel};
use steklov_core::geometry::{Domain, DomainSpec, ParamCurve};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Required by `profile` and `verify`; `figure1` has its own default.
    #[serde(default)]
    pub modes: Option<ModeSelection>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainConfig {
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
    /// Flat cylinder `[−1, 1] × ℝ/Lℤ`; closed-form only.
    Cylinder {
        #[serde(rename = "L")]
        length: f64,
    },
}

impl DomainConfig {
    pub fn planar(&self) -> Option<DomainSpec> {
        match self {
            DomainConfig::Circle { radius } => Some(DomainSpec::Circle { radius: *radius }),
            DomainConfig::Ellipse { a, b } => Some(DomainSpec::Ellipse { a: *a, b: *b }),
            DomainConfig::Annulus { r0 } => Some(DomainSpec::Annulus { r0: *r0 }),
            DomainConfig::Curves { components } => Some(DomainSpec::Curves {
                components: components.clone(),
            }),
            DomainConfig::Cylinder { .. } => None,
        }
    }

    pub fn build_planar(&self) -> Result<Domain, CliError> {
        let sp = self
            .planar()
            .ok_or_else(|| CliError::Config("this subcommand needs a planar domain".into()))?;
        Ok(sp.build()?)
    }

    /// Closed-form model, when the domain has one.
    pub fn exact_model(&self) -> Option<ExactModel> {
        match *self {
            DomainConfig::Circle { radius } => Some(ExactModel::Disk { radius }),
            DomainConfig::Annulus { r0 } => Some(ExactModel::Annulus { r0 }),
            DomainConfig::Cylinder { length } => Some(ExactModel::FlatCylinder { length }),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Nyström eigenfunctions; the only choice for general domains.
    #[default]
    Dtn,
    /// Closed-form eigenfunctions of the disk, annulus or cylinder.
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Nodes per boundary component.
    #[serde(rename = "N")]
    pub n: usize,
    pub n_eigs: usize,
    #[serde(default)]
    pub backend: Backend,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 256,
            n_eigs: 60,
            backend: Backend::Dtn,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub k: u32,
    pub branch: Branch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeSelection {
    /// Closed-form labels; with the dtn backend each picks the nearest computed mode.
    Explicit(Vec<ModeSpec>),
    /// Every mode with `min ≤ σ ≤ max`.
    SigmaRange { min: f64, max: f64 },
    /// Positions in the computed spectrum (dtn only).
    Indices(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub t_min: f64,
    /// Absolute upper end; exclusive with `t_max_fraction`.
    #[serde(default)]
    pub t_max: Option<f64>,
    /// Upper end as a fraction of the chart's `r_max`.
    #[serde(default)]
    pub t_max_fraction: Option<f64>,
    pub n_t: usize,
    /// Source boundary components `N`.
    pub source: Vec<usize>,
    /// Chart samples per source component.
    #[serde(default = "default_n_s")]
    pub n_s: usize,
}

fn default_n_s() -> usize {
    256
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_eps_tol")]
    pub eps_tol: f64,
    #[serde(default)]
    pub c_sup: Option<f64>,
    #[serde(default)]
    pub epsilon0: Option<f64>,
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default)]
    pub c_up: Option<f64>,
}

fn default_delta() -> f64 {
    0.1
}

fn default_eps_tol() -> f64 {
    0.05
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            delta: default_delta(),
            eps_tol: default_eps_tol(),
            c_sup: None,
            epsilon0: None,
            c1: None,
            c_up: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json, Format::Svg]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be nonnegative and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Range checks that serde cannot express.
    pub fn validate(&self) -> Result<(), CliError> {
        match &self.domain {
            DomainConfig::Circle { radius } => positive("domain.R", *radius)?,
            DomainConfig::Ellipse { a, b } => {
                positive("domain.a", *a)?;
                positive("domain.b", *b)?;
            }
            DomainConfig::Annulus { r0 } => {
                if !(*r0 > 0.0 && *r0 < 1.0) {
                    return Err(CliError::Config(format!("domain.r0 must lie in (0, 1), got {r0}")));
                }
            }
            DomainConfig::Curves { components } => {
                if components.is_empty() {
                    return Err(CliError::Config("domain.components is empty".into()));
                }
            }
            DomainConfig::Cylinder { length } => positive("domain.L", *length)?,
        }
        let s = &self.solver;
        if s.n < 16 || s.n % 2 == 1 {
            return Err(CliError::Config(format!("solver.N must be even and at least 16, got {}", s.n)));
        }
        if s.n_eigs == 0 {
            return Err(CliError::Config("solver.n_eigs must be at least 1".into()));
        }
        if s.backend == Backend::Exact && self.domain.exact_model().is_none() {
            return Err(CliError::Config("the exact backend needs a circle, annulus or cylinder".into()));
        }
        if matches!(self.domain, DomainConfig::Cylinder { .. }) && s.backend != Backend::Exact {
            return Err(CliError::Config("the cylinder needs solver.backend = \"exact\"".into()));
        }
        match &self.modes {
            Some(ModeSelection::Explicit(v)) if v.is_empty() => {
                return Err(CliError::Config("modes.explicit is empty".into()))
            }
            Some(ModeSelection::Indices(v)) if v.is_empty() => {
                return Err(CliError::Config("modes.indices is empty".into()))
            }
            Some(ModeSelection::SigmaRange { min, max }) if !(min.is_finite() && max.is_finite() && min <= max) => {
                return Err(CliError::Config(format!("modes.sigma_range needs min ≤ max, got [{min}, {max}]")));
            }
            _ => {}
        }
        if let Some(sw) = &self.sweep {
            nonnegative("sweep.t_min", sw.t_min)?;
            match (sw.t_max, sw.t_max_fraction) {
                (Some(t), None) if t.is_finite() && t > sw.t_min => {}
                (None, Some(f)) if f > 0.0 && f < 1.0 => {}
                _ => {
                    return Err(CliError::Config(
                        "sweep needs exactly one of t_max (> t_min) or t_max_fraction (in (0, 1))".into(),
                    ))
                }
            }
            if sw.n_t < 2 {
                return Err(CliError::Config(format!("sweep.n_t must be at least 2, got {}", sw.n_t)));
            }
            if sw.n_s < 8 {
                return Err(CliError::Config(format!("sweep.n_s must be at least 8, got {}", sw.n_s)));
            }
            if sw.source.is_empty() {
                return Err(CliError::Config("sweep.source is empty".into()));
            }
        }
        let p = &self.params;
        positive("params.delta", p.delta)?;
        nonnegative("params.eps_tol", p.eps_tol)?;
        if let Some(v) = p.c_up {
            nonnegative("params.c_up", v)?;
        }
        for (name, v) in [("params.c1", p.c1), ("params.c_sup", p.c_sup)] {
            if v.is_some_and(|v| !v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be finite")));
            }
        }
        if let Some(v) = p.epsilon0 {
            positive("params.epsilon0", v)?;
        }
        if self.output.formats.is_empty() {
            return Err(CliError::Config("output.formats is empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISK: &str = r#"{
        "domain": {"type": "circle", "R": 1.0},
        "solver": {"N": 128, "n_eigs": 30},
        "modes": {"explicit": [{"k": 10, "branch": "plus"}]},
        "sweep": {"t_min": 0.02, "t_max": 0.8, "n_t": 40, "source": [0]},
        "output": {"dir": "out", "formats": ["csv", "json"]}
    }"#;

    #[test]
    fn parses_and_defaults() {
        let c = ExperimentConfig::from_json(DISK).unwrap();
        assert_eq!(c.solver.backend, Backend::Dtn);
        assert_eq!(c.params.eps_tol, 0.05);
        assert_eq!(c.sweep.as_ref().unwrap().n_s, 256);
        assert!(!c.output.wants(Format::Svg));
        assert_eq!(c.domain.exact_model(), Some(ExactModel::Disk { radius: 1.0 }));
        let disk = ExperimentConfig::from_json(&DISK.replace("circle", "disk")).unwrap();
        assert_eq!(disk.domain, c.domain);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_ranges() {
        for bad in [
            DISK.replace("\"n_eigs\"", "\"n_eig\""),
            DISK.replace("\"R\": 1.0", "\"R\": 1.0, \"r\": 2"),
            DISK.replace("\"output\"", "\"outputs\""),
            DISK.replace("\"N\": 128", "\"N\": 127"),
            DISK.replace("\"t_max\": 0.8", "\"t_max\": 0.01"),
            DISK.replace("\"t_max\": 0.8", "\"t_max\": 0.8, \"t_max_fraction\": 0.5"),
            DISK.replace("\"source\": [0]", "\"source\": []"),
            DISK.replace("\"R\": 1.0", "\"R\": -1.0"),
            DISK.replace("plus", "sideways"),
        ] {
            assert!(matches!(ExperimentConfig::from_json(&bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn cylinder_requires_exact_backend() {
        let cyl = r#"{"domain": {"type": "cylinder", "L": 2.0}}"#;
        assert!(ExperimentConfig::from_json(cyl).is_err());
        let ok = r#"{"domain": {"type": "cylinder", "L": 2.0}, "solver": {"N": 64, "n_eigs": 4, "backend": "exact"}}"#;
        assert!(ExperimentConfig::from_json(ok).is_ok());
        let ell = r#"{"domain": {"type": "ellipse", "a": 2, "b": 1}, "solver": {"N": 64, "n_eigs": 4, "backend": "exact"}}"#;
        assert!(ExperimentConfig::from_json(ell).is_err());
    }
}
