//! Experiment configuration: strict TOML with defaults echoed back out.
//!
//! Unknown keys are fatal everywhere; a typo in a physics parameter must
//! never silently fall back to a default.

use serde::{Deserialize, Serialize};

use quanneal_core::pimc::XiConvention;
use quanneal_core::{ClassicalModel, CouplingTerm, EnergyKind, Spin, ThermalPoint};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub thermal: ThermalConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub sites: usize,
    /// Spin magnitude: 0.5, 1, 1.5, ...
    #[serde(default = "default_spin")]
    pub spin: f64,
    #[serde(default)]
    pub kind: ModelKind,
    pub topology: Topology,
    /// Uniform coupling for ring/chain topologies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<f64>,
    /// Explicit term list (topology = "explicit").
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terms: Vec<TermConfig>,
}

fn default_spin() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    #[default]
    Multilinear,
    Potts,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    Ring,
    Chain,
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub sites: Vec<usize>,
    pub coeff: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ThermalConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pimc: Option<PimcSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub family: FamilyConfig,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Target temperature for SA/POLY; defaults to the thermal block value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max_cap: Option<f64>,
    /// Starting field for EQA/QA.
    #[serde(default = "default_gamma0")]
    pub gamma0: f64,
    /// Final field; defaults to chi.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_final: Option<f64>,
    /// Gap-bound constant; defaults to gamma0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Polynomial-gap exponent for the POLY family.
    #[serde(default = "default_q")]
    pub q: f64,
    /// Non-worst-case N-for-2N variant of the field schedule.
    #[serde(default)]
    pub refined: bool,
    /// Traverse the same control path this many times faster.
    #[serde(default = "default_compression")]
    pub compression: f64,
    /// Rows in the emitted schedule table.
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_epsilon() -> f64 {
    0.01
}
fn default_gamma0() -> f64 {
    1.0
}
fn default_q() -> f64 {
    1.0
}
fn default_compression() -> f64 {
    1.0
}
fn default_points() -> usize {
    200
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyConfig {
    Sa,
    Eqa,
    Qa,
    Poly,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub max_step: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_fidelity: Option<bool>,
}

fn default_tolerance() -> f64 {
    1e-8
}
fn default_samples() -> usize {
    500
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection {
            tolerance: default_tolerance(),
            max_step: 0.0,
            samples: default_samples(),
            track_fidelity: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PimcSection {
    pub slices: usize,
    pub beta_tilde: f64,
    pub sweeps: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_measure_every")]
    pub measure_every: usize,
    /// Fixed transverse field; omitted means gamma = chi.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Drive gamma along the configured schedule before sampling.
    #[serde(default)]
    pub annealed: bool,
    #[serde(default)]
    pub anneal_sweeps: usize,
    #[serde(default)]
    pub xi_convention: XiConventionConfig,
    /// Checkpoint every this many measurements (0 = only at the end).
    #[serde(default)]
    pub checkpoint_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resume_from: Option<String>,
}

fn default_burn_in() -> usize {
    1000
}
fn default_chains() -> usize {
    1
}
fn default_measure_every() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum XiConventionConfig {
    /// Suzuki-Trotter-consistent argument btilde * gamma / L (default; the
    /// quoted chi-in-argument form does not reproduce the quantum model).
    #[default]
    FieldOnly,
    FieldTimesChi,
}

impl From<XiConventionConfig> for XiConvention {
    fn from(c: XiConventionConfig) -> Self {
        match c {
            XiConventionConfig::FieldOnly => XiConvention::FieldOnly,
            XiConventionConfig::FieldTimesChi => XiConvention::FieldTimesChi,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
    /// Significant digits for emitted floats (lossless round-trip at 17).
    #[serde(default = "default_precision")]
    pub precision: usize,
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Json]
}
fn default_precision() -> usize {
    17
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            formats: default_formats(),
            precision: default_precision(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl ExperimentConfig {
    /// Parse and validate; errors carry the offending key or value.
    pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let m = &self.model;
        if m.sites == 0 {
            return Err(CliError::Config("model.sites must be positive".into()));
        }
        let two_s = (2.0 * m.spin).round();
        if (2.0 * m.spin - two_s).abs() > 1e-12 || !(m.spin > 0.0) || two_s > 16.0 {
            return Err(CliError::Config(format!(
                "model.spin must be a half-integer in (0, 8], got {}",
                m.spin
            )));
        }
        match m.topology {
            Topology::Ring | Topology::Chain => {
                if m.coupling.is_none() {
                    return Err(CliError::Config(
                        "model.coupling is required for ring/chain topologies".into(),
                    ));
                }
                if !m.terms.is_empty() {
                    return Err(CliError::Config(
                        "model.terms is only allowed with topology = \"explicit\"".into(),
                    ));
                }
            }
            Topology::Explicit => {
                if m.terms.is_empty() {
                    return Err(CliError::Config(
                        "topology = \"explicit\" requires model.terms".into(),
                    ));
                }
                if m.coupling.is_some() {
                    return Err(CliError::Config(
                        "model.coupling conflicts with an explicit term list".into(),
                    ));
                }
            }
        }
        match (self.thermal.temperature, self.thermal.beta) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "thermal.temperature and thermal.beta are mutually exclusive; set exactly one"
                        .into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config(
                    "one of thermal.temperature or thermal.beta is required".into(),
                ))
            }
            _ => {}
        }
        if let Some(s) = &self.run.schedule {
            if !(s.epsilon > 0.0) {
                return Err(CliError::Config("run.schedule.epsilon must be positive".into()));
            }
            if !(s.compression >= 1.0) {
                return Err(CliError::Config(
                    "run.schedule.compression must be >= 1".into(),
                ));
            }
            if s.points < 2 {
                return Err(CliError::Config("run.schedule.points must be >= 2".into()));
            }
        }
        if let Some(p) = &self.run.pimc {
            if p.annealed && self.run.schedule.is_none() {
                return Err(CliError::Config(
                    "annealed PIMC needs a run.schedule block for the field path".into(),
                ));
            }
            if p.annealed && p.anneal_sweeps == 0 {
                return Err(CliError::Config(
                    "annealed PIMC needs run.pimc.anneal_sweeps >= 1".into(),
                ));
            }
        }
        let prec = self.output.precision;
        if !(1..=17).contains(&prec) {
            return Err(CliError::Config(format!(
                "output.precision must be in 1..=17, got {prec}"
            )));
        }
        Ok(())
    }

    /// Canonical echo with all defaults materialized.
    pub fn canonical_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn build_model(&self) -> Result<ClassicalModel, CliError> {
        let m = &self.model;
        let spin = Spin((2.0 * m.spin).round() as u8);
        let kind = match m.kind {
            ModelKind::Multilinear => EnergyKind::Multilinear,
            ModelKind::Potts => EnergyKind::KroneckerDelta,
        };
        let terms: Vec<CouplingTerm> = match m.topology {
            Topology::Ring => {
                let j = m.coupling.unwrap();
                (0..m.sites)
                    .map(|k| {
                        let (a, b) = (k, (k + 1) % m.sites);
                        let (a, b) = if a < b { (a, b) } else { (b, a) };
                        CouplingTerm::new(vec![a, b], j)
                    })
                    .collect()
            }
            Topology::Chain => {
                let j = m.coupling.unwrap();
                (0..m.sites.saturating_sub(1))
                    .map(|k| CouplingTerm::new(vec![k, k + 1], j))
                    .collect()
            }
            Topology::Explicit => m
                .terms
                .iter()
                .map(|t| CouplingTerm::new(t.sites.clone(), t.coeff))
                .collect(),
        };
        ClassicalModel::new(m.sites, spin, terms, kind).map_err(CliError::from)
    }

    pub fn thermal_point(&self) -> Result<ThermalPoint, CliError> {
        match (self.thermal.temperature, self.thermal.beta) {
            (Some(t), None) => ThermalPoint::from_temperature(t).map_err(CliError::from),
            (None, Some(b)) => ThermalPoint::from_beta(b).map_err(CliError::from),
            _ => unreachable!("validated"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[model]
sites = 4
topology = "ring"
coupling = 1.0

[thermal]
temperature = 1.0
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.model.spin, 0.5);
        assert_eq!(cfg.output.precision, 17);
        assert_eq!(cfg.run.seed, 0);
        let m = cfg.build_model().unwrap();
        assert_eq!(m.n_sites(), 4);
        assert_eq!(m.terms().len(), 4);
    }

    #[test]
    fn both_temperature_and_beta_rejected() {
        let text = MINIMAL.replace("temperature = 1.0", "temperature = 1.0\nbeta = 1.0");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("temperature") && msg.contains("beta"), "{msg}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = MINIMAL.replace("coupling = 1.0", "coupling = 1.0\nfrustration = 2");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("frustration"));
    }

    #[test]
    fn negative_slices_rejected() {
        let text = format!(
            "{MINIMAL}\n[run.pimc]\nslices = -4\nbeta_tilde = 10.0\nsweeps = 100\n"
        );
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("slices") || err.to_string().contains("invalid"));
    }

    #[test]
    fn canonical_echo_roundtrips() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let echo = cfg.canonical_toml().unwrap();
        let back = ExperimentConfig::parse(&echo).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn explicit_terms_and_conflicts() {
        let text = r#"
[model]
sites = 3
topology = "explicit"

[[model.terms]]
sites = [0, 2]
coeff = -0.5

[thermal]
beta = 2.0
"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        let m = cfg.build_model().unwrap();
        assert_eq!(m.terms().len(), 1);
        assert_eq!(cfg.thermal_point().unwrap().temperature, 0.5);

        let bad = text.replace("topology = \"explicit\"", "topology = \"ring\"");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }
}
