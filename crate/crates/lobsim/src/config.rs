//! Plain-text key-value configuration files.
//!
//! ```text
//! # comment
//! [book]
//! eta_a = 1e-3
//! ...
//! [intensity]
//! lambda = 630000
//! [penalty]
//! A_bar = 4200
//! ```
//!
//! Keys mirror the model symbols (`eta_a`, `beta_a`, `alpha_a`, `sigma_a`,
//! the `_b` twins, `rho`, `L`, `tick`, `lambda`, `kappa`, `lambda0`,
//! `kappa0`, `r`, `A_bar`, `a_bar`); units are dollars and minutes. Missing
//! keys fall back to the baseline parameter set, and every run writes the
//! fully resolved values back out as an `effective_config.cfg`.
//!
//! Scenario files add a `[scenario]` section (`name`, `overrides` as a
//! comma-separated `key=value` list, `n_paths`, `seed`, `dx`, `dt`,
//! `horizon`, `outputs`).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{validate_params, ModelBundle};

/// Parsed sections of a config file, order-preserving per section.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
    label: String,
}

impl RawConfig {
    pub fn parse_str(text: &str, label: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config {
                    path: label.to_string(),
                    message: format!("line {}: expected `key = value`, got `{raw}`", lineno + 1),
                });
            };
            if current.is_empty() {
                return Err(Error::Config {
                    path: label.to_string(),
                    message: format!("line {}: key before any [section]", lineno + 1),
                });
            }
            sections
                .get_mut(&current)
                .unwrap()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(RawConfig {
            sections,
            label: label.to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_str(&text, &path.display().to_string())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|s| s.as_str())
    }

    pub fn get_f64(&self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) => s.parse::<f64>().map(Some).map_err(|_| Error::Config {
                path: self.label.clone(),
                message: format!("[{section}] {key}: expected a number, got `{s}`"),
            }),
        }
    }

    pub fn get_u64(&self, section: &str, key: &str) -> Result<Option<u64>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(s) => s.parse::<u64>().map(Some).map_err(|_| Error::Config {
                path: self.label.clone(),
                message: format!("[{section}] {key}: expected an unsigned integer, got `{s}`"),
            }),
        }
    }

    /// Model bundle: baseline defaults overridden by whatever keys are present,
    /// then validated.
    pub fn to_bundle(&self) -> Result<ModelBundle> {
        let mut bundle = ModelBundle::baseline();
        for (section, keys) in &self.sections {
            // [scenario] and [run] carry no model parameters; effective
            // configs can be fed back in as-is.
            if section == "scenario" || section == "run" {
                continue;
            }
            if !matches!(section.as_str(), "book" | "intensity" | "penalty") {
                return Err(Error::Config {
                    path: self.label.clone(),
                    message: format!("unknown section [{section}]"),
                });
            }
            for key in keys.keys() {
                let value = self.get_f64(section, key)?.unwrap();
                apply_override(&mut bundle, key, value).map_err(|e| Error::Config {
                    path: self.label.clone(),
                    message: e.to_string(),
                })?;
            }
        }
        validate_params(bundle.book, bundle.intensity, bundle.penalty)
    }

    /// The optional `[scenario]` section.
    pub fn scenario(&self) -> Result<Option<ScenarioSection>> {
        if !self.sections.contains_key("scenario") {
            return Ok(None);
        }
        let name = self
            .get("scenario", "name")
            .unwrap_or("scenario")
            .to_string();
        let mut overrides = Vec::new();
        if let Some(list) = self.get("scenario", "overrides") {
            for item in list.split(',').filter(|s| !s.trim().is_empty()) {
                let Some((k, v)) = item.split_once('=') else {
                    return Err(Error::Config {
                        path: self.label.clone(),
                        message: format!("overrides: expected `key=value`, got `{item}`"),
                    });
                };
                let value: f64 = v.trim().parse().map_err(|_| Error::Config {
                    path: self.label.clone(),
                    message: format!("override {}: expected a number, got `{v}`", k.trim()),
                })?;
                overrides.push((k.trim().to_string(), value));
            }
        }
        let outputs = match self.get("scenario", "outputs") {
            None => None,
            Some("csv") => Some(OutputFormat::Csv),
            Some("csv+svg") => Some(OutputFormat::CsvSvg),
            Some(other) => {
                return Err(Error::Config {
                    path: self.label.clone(),
                    message: format!("outputs: expected csv or csv+svg, got `{other}`"),
                })
            }
        };
        Ok(Some(ScenarioSection {
            name,
            overrides,
            n_paths: self.get_u64("scenario", "n_paths")?.map(|v| v as usize),
            seed: self.get_u64("scenario", "seed")?,
            dx: self.get_f64("scenario", "dx")?,
            dt: self.get_f64("scenario", "dt")?,
            horizon: self.get_f64("scenario", "horizon")?,
            outputs,
        }))
    }
}

/// Output format selector shared by the CLI and scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    CsvSvg,
}

impl OutputFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::CsvSvg => "csv+svg",
        }
    }
}

/// Contents of a `[scenario]` section, all optional except the name.
#[derive(Debug, Clone)]
pub struct ScenarioSection {
    pub name: String,
    pub overrides: Vec<(String, f64)>,
    pub n_paths: Option<usize>,
    pub seed: Option<u64>,
    pub dx: Option<f64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub outputs: Option<OutputFormat>,
}

/// Sets one named parameter; override keys are the config keys.
pub fn apply_override(bundle: &mut ModelBundle, key: &str, value: f64) -> Result<()> {
    let slot: &mut f64 = match key {
        "eta_a" => &mut bundle.book.ask.eta,
        "beta_a" => &mut bundle.book.ask.beta,
        "alpha_a" => &mut bundle.book.ask.alpha,
        "sigma_a" => &mut bundle.book.ask.sigma,
        "eta_b" => &mut bundle.book.bid.eta,
        "beta_b" => &mut bundle.book.bid.beta,
        "alpha_b" => &mut bundle.book.bid.alpha,
        "sigma_b" => &mut bundle.book.bid.sigma,
        "rho" => &mut bundle.book.rho,
        "L" => &mut bundle.book.half_width,
        "tick" => &mut bundle.book.tick,
        "lambda" => &mut bundle.intensity.lambda,
        "kappa" => &mut bundle.intensity.kappa,
        "lambda0" => &mut bundle.intensity.lambda0,
        "kappa0" => &mut bundle.intensity.kappa0,
        "r" => &mut bundle.intensity.r,
        "A_bar" => &mut bundle.penalty.cost_scale,
        "a_bar" => &mut bundle.penalty.cost_growth,
        other => {
            return Err(Error::Config {
                path: String::new(),
                message: format!("unknown parameter key `{other}`"),
            })
        }
    };
    *slot = value;
    Ok(())
}

/// Run settings recorded alongside the model in the effective config.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub subcommand: String,
    pub seed: u64,
    pub dx: f64,
    pub dt_value: f64,
    pub dt_sim: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub format: OutputFormat,
}

/// Renders the fully resolved configuration; every run writes this next to
/// its outputs so it is self-describing.
pub fn render_effective_config(bundle: &ModelBundle, run: &RunSettings) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# effective configuration (all values resolved)");
    let _ = writeln!(s, "[book]");
    let _ = writeln!(s, "eta_a = {}", bundle.book.ask.eta);
    let _ = writeln!(s, "beta_a = {}", bundle.book.ask.beta);
    let _ = writeln!(s, "alpha_a = {}", bundle.book.ask.alpha);
    let _ = writeln!(s, "sigma_a = {}", bundle.book.ask.sigma);
    let _ = writeln!(s, "eta_b = {}", bundle.book.bid.eta);
    let _ = writeln!(s, "beta_b = {}", bundle.book.bid.beta);
    let _ = writeln!(s, "alpha_b = {}", bundle.book.bid.alpha);
    let _ = writeln!(s, "sigma_b = {}", bundle.book.bid.sigma);
    let _ = writeln!(s, "rho = {}", bundle.book.rho);
    let _ = writeln!(s, "L = {}", bundle.book.half_width);
    let _ = writeln!(s, "tick = {}", bundle.book.tick);
    let _ = writeln!(s, "[intensity]");
    let _ = writeln!(s, "lambda = {}", bundle.intensity.lambda);
    let _ = writeln!(s, "kappa = {}", bundle.intensity.kappa);
    let _ = writeln!(s, "lambda0 = {}", bundle.intensity.lambda0);
    let _ = writeln!(s, "kappa0 = {}", bundle.intensity.kappa0);
    let _ = writeln!(s, "r = {}", bundle.intensity.r);
    let _ = writeln!(s, "[penalty]");
    let _ = writeln!(s, "A_bar = {}", bundle.penalty.cost_scale);
    let _ = writeln!(s, "a_bar = {}", bundle.penalty.cost_growth);
    let _ = writeln!(s, "[run]");
    let _ = writeln!(s, "subcommand = {}", run.subcommand);
    let _ = writeln!(s, "seed = {}", run.seed);
    let _ = writeln!(s, "dx = {}", run.dx);
    let _ = writeln!(s, "dt_value = {}", run.dt_value);
    let _ = writeln!(s, "dt_sim = {}", run.dt_sim);
    let _ = writeln!(s, "horizon = {}", run.horizon);
    let _ = writeln!(s, "n_paths = {}", run.n_paths);
    let _ = writeln!(s, "format = {}", run.format.as_str());
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# sample
[book]
eta_a = 1e-3
eta_b = 1e-3   # trailing comment
rho = -0.05

[intensity]
lambda = 630000
r = 0.5

[penalty]
A_bar = 4200
";

    #[test]
    fn parses_sections_keys_and_comments() {
        let cfg = RawConfig::parse_str(SAMPLE, "sample").unwrap();
        assert_eq!(cfg.get("book", "eta_a"), Some("1e-3"));
        assert_eq!(cfg.get("book", "eta_b"), Some("1e-3"));
        assert_eq!(cfg.get_f64("book", "rho").unwrap(), Some(-0.05));
        assert_eq!(cfg.get("intensity", "lambda"), Some("630000"));
        assert_eq!(cfg.get("book", "missing"), None);
    }

    #[test]
    fn missing_keys_fall_back_to_baseline() {
        let cfg = RawConfig::parse_str(SAMPLE, "sample").unwrap();
        let bundle = cfg.to_bundle().unwrap();
        assert_eq!(bundle, ModelBundle::baseline());
    }

    #[test]
    fn overridden_keys_take_effect() {
        let cfg = RawConfig::parse_str("[book]\neta_a = 5e-4\n", "t").unwrap();
        let bundle = cfg.to_bundle().unwrap();
        assert_eq!(bundle.book.ask.eta, 5e-4);
        assert_eq!(bundle.book.bid.eta, 1e-3);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(RawConfig::parse_str("[book]\nnonsense line\n", "t").is_err());
        assert!(RawConfig::parse_str("eta_a = 1\n", "t").is_err());
        let bad_value = RawConfig::parse_str("[book]\neta_a = fast\n", "t").unwrap();
        assert!(bad_value.to_bundle().is_err());
        let bad_section = RawConfig::parse_str("[bok]\neta_a = 1e-3\n", "t").unwrap();
        assert!(bad_section.to_bundle().is_err());
        let bad_key = RawConfig::parse_str("[book]\neta_z = 1e-3\n", "t").unwrap();
        assert!(bad_key.to_bundle().is_err());
        // invalid parameter values are caught by validation
        let bad_param = RawConfig::parse_str("[book]\nalpha_a = 0.1\n", "t").unwrap();
        assert!(bad_param.to_bundle().is_err());
    }

    #[test]
    fn scenario_section_round_trip() {
        let text = "\
[scenario]
name = eta_half
overrides = eta_a=5e-4, eta_b=5e-4
n_paths = 50
seed = 7
outputs = csv+svg
";
        let cfg = RawConfig::parse_str(text, "t").unwrap();
        let sc = cfg.scenario().unwrap().unwrap();
        assert_eq!(sc.name, "eta_half");
        assert_eq!(sc.overrides.len(), 2);
        assert_eq!(sc.overrides[0], ("eta_a".to_string(), 5e-4));
        assert_eq!(sc.n_paths, Some(50));
        assert_eq!(sc.seed, Some(7));
        assert_eq!(sc.outputs, Some(OutputFormat::CsvSvg));
        // no [scenario] section
        let plain = RawConfig::parse_str(SAMPLE, "t").unwrap();
        assert!(plain.scenario().unwrap().is_none());
    }

    #[test]
    fn effective_config_reparses_to_same_bundle() {
        let bundle = ModelBundle::baseline();
        let run = RunSettings {
            subcommand: "value".to_string(),
            seed: 1729,
            dx: 1e-3,
            dt_value: 1e-2,
            dt_sim: 1e-3,
            horizon: 30.0,
            n_paths: 200,
            format: OutputFormat::Csv,
        };
        let text = render_effective_config(&bundle, &run);
        let cfg = RawConfig::parse_str(&text, "roundtrip").unwrap();
        assert_eq!(cfg.to_bundle().unwrap(), bundle);
        assert_eq!(cfg.get("run", "seed"), Some("1729"));
    }
}
