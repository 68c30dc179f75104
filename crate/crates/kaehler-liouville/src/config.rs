//! The JSON configuration document.
//!
//! Unknown keys are rejected everywhere.  Rationals are strings such as
//! `"1/2"`, `"-3"` or `"0.25"` and are parsed exactly.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Deserializer};
use thiserror::Error;

use crate::block::{BlockError, BlockSeed, Profile};
use crate::constants::{ConstantBundle, ConstantsError};
use crate::exact::{parse_q, to_f64, Q};
use crate::flow::{Mode, PhaseState, Stepper};
use crate::poset::{Kind, Poset, PosetError};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
}

/// An exact rational read from a `"p/q"` string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rational(pub Q);

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_q(&s)
            .map(Rational)
            .ok_or_else(|| serde::de::Error::custom(format!("`{s}` is not a rational of the form \"p/q\"")))
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(rename = "type", default)]
    pub kind: Kind,
    pub poset: PosetSpec,
    #[serde(default)]
    pub constants: ConstantsSpec,
    #[serde(default)]
    pub seeds: BTreeMap<String, SeedSpec>,
    #[serde(default)]
    pub simulate: Option<SimulateSpec>,
    #[serde(default)]
    pub check: CheckSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosetSpec {
    pub elements: Vec<String>,
    pub sizes: BTreeMap<String, usize>,
    /// `[below, above]` pairs.
    #[serde(default)]
    pub covers: Vec<(String, String)>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    #[serde(default)]
    pub c: BTreeMap<String, Vec<Rational>>,
    #[serde(default)]
    pub e: Vec<ConjunctionSpec>,
    #[serde(default)]
    pub d: BTreeMap<String, Rational>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjunctionSpec {
    pub below: String,
    pub above: String,
    pub value: Rational,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    #[serde(default = "default_l")]
    pub l: f64,
    pub d_star: Option<f64>,
    #[serde(default)]
    pub profile: ProfileSpec,
}

fn default_l() -> f64 {
    PI
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSpec {
    #[default]
    Cos2,
    Table { samples: Vec<f64> },
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ModeSpec {
    #[serde(alias = "REAL")]
    Real,
    #[serde(alias = "COMPLEX")]
    Complex,
}

impl From<ModeSpec> for Mode {
    fn from(m: ModeSpec) -> Mode {
        match m {
            ModeSpec::Real => Mode::Real,
            ModeSpec::Complex => Mode::Complex,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum StepperSpec {
    #[default]
    Adaptive,
    Fixed,
    Midpoint,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    #[serde(default = "default_mode")]
    pub mode: ModeSpec,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub stepper: StepperSpec,
    /// Step of the fixed-step schemes.
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub record_every: usize,
    #[serde(default = "default_drift")]
    pub drift_threshold: f64,
}

fn default_mode() -> ModeSpec {
    ModeSpec::Real
}
fn default_t_final() -> f64 {
    10.0
}
fn default_rtol() -> f64 {
    1e-12
}
fn default_atol() -> f64 {
    1e-14
}
fn default_step() -> f64 {
    1e-2
}
fn default_one() -> usize {
    1
}
fn default_drift() -> f64 {
    1e-6
}

impl Default for SimulateSpec {
    fn default() -> SimulateSpec {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(default)]
    pub j: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default = "default_drift")]
    pub threshold: f64,
}

fn default_samples() -> usize {
    200
}
fn default_fd_step() -> f64 {
    1e-3
}

impl Default for CheckSpec {
    fn default() -> CheckSpec {
        CheckSpec { samples: default_samples(), fd_step: default_fd_step(), threshold: default_drift() }
    }
}

pub fn parse_config(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<Config, ConfigError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: Config = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_data() {
            ConfigError::Schema { path, message: inner.to_string() }
        } else {
            ConfigError::Parse { line: inner.line(), column: inner.column(), message: inner.to_string() }
        }
    })?;
    cfg.check_references()?;
    Ok(cfg)
}

impl Config {
    fn check_references(&self) -> Result<(), ConfigError> {
        let known = |name: &str| self.poset.elements.iter().any(|e| e == name);
        let missing = |path: String, name: &str| ConfigError::Schema { path, message: format!("unknown block `{name}`") };
        for (i, (a, b)) in self.poset.covers.iter().enumerate() {
            for name in [a, b] {
                if !known(name) {
                    return Err(missing(format!("poset.covers[{i}]"), name));
                }
            }
        }
        for name in self.poset.sizes.keys() {
            if !known(name) {
                return Err(missing(format!("poset.sizes.{name}"), name));
            }
        }
        for name in self.constants.c.keys() {
            if !known(name) {
                return Err(missing(format!("constants.c.{name}"), name));
            }
        }
        for name in self.constants.d.keys() {
            if !known(name) {
                return Err(missing(format!("constants.d.{name}"), name));
            }
        }
        for (i, e) in self.constants.e.iter().enumerate() {
            for name in [&e.below, &e.above] {
                if !known(name) {
                    return Err(missing(format!("constants.e[{i}]"), name));
                }
            }
        }
        for name in self.seeds.keys() {
            if !known(name) {
                return Err(missing(format!("seeds.{name}"), name));
            }
        }
        Ok(())
    }

    pub fn build_poset(&self) -> Result<Poset, Vec<PosetError>> {
        Poset::new(&self.poset.elements, &self.poset.sizes, &self.poset.covers, self.kind)
    }

    pub fn build_bundle(&self, poset: &Poset) -> Result<ConstantBundle, Vec<ConstantsError>> {
        let c = self.constants.c.iter().map(|(k, v)| (k.clone(), v.iter().map(|r| r.0.clone()).collect())).collect();
        let e: Vec<(String, String, Q)> =
            self.constants.e.iter().map(|e| (e.below.clone(), e.above.clone(), e.value.0.clone())).collect();
        let d = self.constants.d.iter().map(|(k, v)| (k.clone(), v.0.clone())).collect();
        ConstantBundle::from_named(poset, &c, &e, &d)
    }

    /// The seed of block `name`, with the block's c-row; blocks without
    /// a `seeds` entry get the `cos²` seed with `l = π`.
    pub fn build_seed(&self, poset: &Poset, bundle: &ConstantBundle, name: &str) -> Result<BlockSeed, BlockError> {
        let a = poset.index_of(name).expect("block name checked by caller");
        let c: Vec<f64> = bundle.c[a].iter().map(to_f64).collect();
        let spec = self.seeds.get(name);
        let l = spec.map_or(PI, |s| s.l);
        let seed = match spec.map(|s| &s.profile) {
            Some(ProfileSpec::Table { samples }) => {
                // Without an explicit d_* the table's own curvature at 0 is used.
                let probe = BlockSeed::new(c.clone(), 1.0, l, Profile::table(samples.clone())?)?;
                let d_star = -probe.d2h(0.0);
                probe.with_d_star(if d_star > 0.0 { d_star } else { 1.0 })?
            }
            _ => BlockSeed::cos2(c, l)?,
        };
        match spec.and_then(|s| s.d_star) {
            Some(d) => seed.with_d_star(d),
            None => Ok(seed),
        }
    }

    /// Stepper and initial state of the `simulate` section.
    pub fn stepper(sim: &SimulateSpec) -> Stepper {
        match sim.stepper {
            StepperSpec::Adaptive => Stepper::Adaptive { rtol: sim.rtol, atol: sim.atol },
            StepperSpec::Fixed => Stepper::Fixed { step: sim.step },
            StepperSpec::Midpoint => Stepper::Midpoint { step: sim.step },
        }
    }

    pub fn initial_state(sim: &SimulateSpec) -> Option<PhaseState> {
        sim.initial.as_ref().map(|i| PhaseState {
            x: i.x.clone(),
            p: i.p.clone(),
            j: i.j.clone().unwrap_or_else(|| vec![0.0; i.x.len()]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CP2: &str = r#"{
        "type": "KL-A",
        "poset": { "elements": ["a"], "sizes": { "a": 2 } },
        "seeds": { "a": { "l": 3.141592653589793, "profile": { "kind": "cos2" } } }
    }"#;

    #[test]
    fn minimal_projective_plane() {
        let cfg = parse_config_str(CP2).unwrap();
        let p = cfg.build_poset().unwrap();
        let b = cfg.build_bundle(&p).unwrap();
        let s = cfg.build_seed(&p, &b, "a").unwrap();
        assert_eq!(s.c(), &[1.0, 0.5, 0.0]);
    }

    #[test]
    fn schema_paths() {
        let bad = r#"{ "poset": { "elements": ["a"], "sizes": { "a": 2 }, "covers": [["x", "a"]] } }"#;
        assert_eq!(
            parse_config_str(bad).unwrap_err(),
            ConfigError::Schema { path: "poset.covers[0]".into(), message: "unknown block `x`".into() }
        );
        let unknown = r#"{ "poset": { "elements": ["a"], "sizes": { "a": 2 }, "colour": 1 } }"#;
        match parse_config_str(unknown).unwrap_err() {
            ConfigError::Schema { path, .. } => assert_eq!(path, "poset.colour"),
            e => panic!("{e:?}"),
        }
        let rational = r#"{ "poset": { "elements": ["a"], "sizes": { "a": 2 } }, "constants": { "c": { "a": ["1", "x", "0"] } } }"#;
        match parse_config_str(rational).unwrap_err() {
            ConfigError::Schema { path, .. } => assert_eq!(path, "constants.c.a[1]"),
            e => panic!("{e:?}"),
        }
        assert!(matches!(parse_config_str("{ \"poset\": "), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn row_errors_come_from_constants() {
        let cfg = r#"{ "poset": { "elements": ["a"], "sizes": { "a": 2 } }, "constants": { "c": { "a": ["2", "1/2", "0"] } } }"#;
        let cfg = parse_config_str(cfg).unwrap();
        let p = cfg.build_poset().unwrap();
        let errs = cfg.build_bundle(&p).unwrap_err();
        assert!(errs.contains(&ConstantsError::RowEndpoints { block: "a".into() }));
    }
}
