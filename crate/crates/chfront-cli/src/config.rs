//! Run configuration: a TOML file with one table per subsystem, overridden by
//! `CHFRONT_<SECTION>_<KEY>` environment variables and then by flags.
//!
//! Units are the model's nondimensional ones: lengths in units of the
//! fourth-order diffusion length, times in the matching time unit.

use std::path::Path;

use chfront::discrete_operator::ChiTreatment;
use chfront::dispersion::ModelParams;
use chfront::hopf::Normalization;
use chfront::simulate::{Perturbation, Scheme, SimConfig, SourceProfile, Trigger};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const ENV_PREFIX: &str = "CHFRONT_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigsSection {
    /// Grid spacing.
    pub h: f64,
    /// Extra length beyond the plateau on each side.
    pub margin: f64,
    pub treatment: ChiTreatment,
}

impl Default for EigsSection {
    fn default() -> Self {
        Self { h: 0.05, margin: 25.0, treatment: ChiTreatment::InterfaceCorrected }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HopfSection {
    pub h: f64,
    pub margin: f64,
    pub normalization: Normalization,
    /// Largest amplitude of the emitted branch table.
    pub r_max: f64,
    pub r_points: usize,
}

impl Default for HopfSection {
    fn default() -> Self {
        Self { h: 0.05, margin: 25.0, normalization: Normalization::InnerProduct, r_max: 0.3, r_points: 31 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateSection {
    pub domain_length: f64,
    pub n_modes: usize,
    pub dt: f64,
    pub t_final: f64,
    pub trigger: Trigger,
    pub source: Option<SourceProfile>,
    /// Defaults to a small Gaussian at `x = −ℓ/2`.
    pub perturbation: Option<Perturbation>,
    pub probe_x: f64,
    pub record_dt: f64,
    pub scheme: Scheme,
    pub save_field_every: usize,
    pub blowup_cap: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            domain_length: d.domain_length,
            n_modes: d.n_modes,
            dt: d.dt,
            t_final: d.t_final,
            trigger: d.trigger,
            source: d.source,
            perturbation: None,
            probe_x: d.probe_x,
            record_dt: d.record_dt,
            scheme: d.scheme,
            save_field_every: d.save_field_every,
            blowup_cap: d.blowup_cap,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    pub c_min: f64,
    pub c_max: f64,
    pub n: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { c_min: 1.52, c_max: 1.56, n: 8 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub model: ModelParams,
    pub eigs: EigsSection,
    pub hopf: HopfSection,
    pub simulate: SimulateSection,
    pub sweep: SweepSection,
}

/// Flag values that take precedence over file and environment.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub ell: Option<f64>,
    pub speed: Option<f64>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub chi_plus: Option<f64>,
    pub chi_minus: Option<f64>,
    pub eta: Option<f64>,
}

impl Config {
    pub fn sim_config(&self) -> SimConfig {
        let s = &self.simulate;
        SimConfig {
            params: self.model,
            domain_length: s.domain_length,
            n_modes: s.n_modes,
            dt: s.dt,
            t_final: s.t_final,
            trigger: s.trigger.clone(),
            source: s.source.clone(),
            perturbation: s.perturbation.clone().unwrap_or(Perturbation::Gaussian {
                x0: -self.model.ell / 2.0,
                amp: 1e-3,
                width: 1.0,
            }),
            probe_x: s.probe_x,
            record_dt: s.record_dt,
            scheme: s.scheme,
            save_field_every: s.save_field_every,
            blowup_cap: s.blowup_cap,
        }
    }

    /// Every violated invariant; empty when the configuration is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.model.validate() {
            match e {
                chfront::dispersion::DispersionError::InvalidParams(v) => {
                    out.extend(v.into_iter().map(|m| format!("model: {m}")))
                }
                other => out.push(format!("model: {other}")),
            }
        }
        for (name, h, margin) in [("eigs", self.eigs.h, self.eigs.margin), ("hopf", self.hopf.h, self.hopf.margin)] {
            if !(h > 0.0) {
                out.push(format!("{name}: h > 0 required (got {h})"));
            }
            if !(margin >= chfront::discrete_operator::DEFAULT_MARGIN) {
                out.push(format!(
                    "{name}: margin >= {} required (got {margin})",
                    chfront::discrete_operator::DEFAULT_MARGIN
                ));
            }
        }
        if !(self.hopf.r_max > 0.0) || self.hopf.r_points < 2 {
            out.push("hopf: r_max > 0 and r_points >= 2 required".into());
        }
        let sw = &self.sweep;
        if !(sw.c_min > 0.0 && sw.c_min < sw.c_max) || sw.n < 2 {
            out.push(format!("sweep: need 0 < c_min < c_max and n >= 2 (got {}, {}, {})", sw.c_min, sw.c_max, sw.n));
        }
        if out.is_empty() {
            if let Err(e) = self.sim_config().validate() {
                out.push(format!("simulate: {e}"));
            }
        }
        out
    }

    /// SHA-256 of the canonical JSON form (keys sorted at every level).
    pub fn hash(&self) -> String {
        let v = serde_json::to_value(self).expect("config serialises");
        let text = serde_json::to_string(&v).expect("value serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Reads `path` (if any), applies `CHFRONT_*` variables from `env`, then
/// `flags`, and validates the result.
pub fn load(
    path: Option<&Path>,
    env: impl IntoIterator<Item = (String, String)>,
    flags: &Overrides,
) -> Result<Config, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|source| ConfigError::Io { path: p.display().to_string(), source })?,
        None => String::new(),
    };
    parse(&text, env, flags)
}

pub fn parse(
    text: &str,
    env: impl IntoIterator<Item = (String, String)>,
    flags: &Overrides,
) -> Result<Config, ConfigError> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    let mut problems = unknown_keys(&table);
    for (k, v) in env {
        let Some(rest) = k.strip_prefix(ENV_PREFIX) else { continue };
        let lower = rest.to_ascii_lowercase();
        let Some((section, key)) = lower.split_once('_') else {
            problems.push(format!("environment variable {k} does not name a section and key"));
            continue;
        };
        if !known_key(section, key) {
            problems.push(format!("environment variable {k} names unknown key {section}.{key}"));
            continue;
        }
        let value = format!("v = {v}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or(toml::Value::String(v));
        table
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .map(|t| t.insert(key.to_string(), value));
    }
    if !problems.is_empty() {
        return Err(ConfigError::Validation(problems));
    }
    let mut cfg: Config =
        Config::deserialize(toml::Value::Table(table)).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let m = &mut cfg.model;
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut m.ell, flags.ell);
    set(&mut m.c, flags.speed);
    set(&mut m.gamma, flags.gamma);
    set(&mut m.beta, flags.beta);
    set(&mut m.chi_plus, flags.chi_plus);
    set(&mut m.chi_minus, flags.chi_minus);
    set(&mut m.eta, flags.eta);
    let bad = cfg.violations();
    if bad.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Validation(bad))
    }
}

fn defaults_table() -> toml::Table {
    let v = toml::Value::try_from(Config::default()).expect("defaults serialise");
    v.as_table().cloned().unwrap_or_default()
}

fn known_key(section: &str, key: &str) -> bool {
    let d = defaults_table();
    match d.get(section).and_then(|s| s.as_table()) {
        Some(t) => t.contains_key(key) || matches!((section, key), ("simulate", "source" | "perturbation")),
        None => false,
    }
}

fn unknown_keys(table: &toml::Table) -> Vec<String> {
    let d = defaults_table();
    let mut out = Vec::new();
    for (section, body) in table {
        if !d.contains_key(section) {
            out.push(format!("unknown section [{section}]"));
            continue;
        }
        let Some(body) = body.as_table() else {
            out.push(format!("{section} must be a table"));
            continue;
        };
        for key in body.keys() {
            if !known_key(section, key) {
                out.push(format!("unknown key {section}.{key}"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn none() -> Vec<(String, String)> {
        Vec::new()
    }

    #[test]
    fn empty_gives_defaults() {
        let c = parse("", none(), &Overrides::default()).unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.model.chi_plus, 1.0);
        assert_eq!(c.model.chi_minus, -1.0);
        assert_eq!(c.model.beta, 1.0);
        assert_eq!(c.model.eta, 0.0);
    }

    #[test]
    fn negative_ell_named() {
        let e = parse("[model]\nell = -1.0\nbeta = 0.0\n", none(), &Overrides::default()).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("ell > 0"), "{msg}");
        assert!(msg.contains("beta > 0"), "{msg}");
    }

    #[test]
    fn hash_ignores_key_order() {
        let a = "[model]\nell = 20.0\ngamma = -1.0\nc = 1.56\n[eigs]\nh = 0.1\n";
        let b = "[eigs]\nh = 0.1\n[model]\nc = 1.56\ngamma = -1.0\nell = 20.0\n";
        let ca = parse(a, none(), &Overrides::default()).unwrap();
        let cb = parse(b, none(), &Overrides::default()).unwrap();
        assert_eq!(ca.hash(), cb.hash());
        let cc = parse("[model]\nell = 21.0\n", none(), &Overrides::default()).unwrap();
        assert_ne!(ca.hash(), cc.hash());
    }

    #[test]
    fn env_then_flags() {
        let env = vec![
            ("CHFRONT_MODEL_ELL".to_string(), "25".to_string()),
            ("CHFRONT_MODEL_GAMMA".to_string(), "0.5".to_string()),
            ("CHFRONT_HOPF_NORMALIZATION".to_string(), "envelope_fit".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ];
        let flags = Overrides { gamma: Some(1.0), ..Default::default() };
        let c = parse("[model]\nell = 10.0\n", env, &flags).unwrap();
        assert_eq!(c.model.ell, 25.0);
        assert_eq!(c.model.gamma, 1.0);
        assert_eq!(c.hopf.normalization, Normalization::EnvelopeFit);
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = parse("[model]\nel = 3.0\n[nope]\nx = 1\n", none(), &Overrides::default()).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("model.el") && msg.contains("[nope]"), "{msg}");
    }
}
