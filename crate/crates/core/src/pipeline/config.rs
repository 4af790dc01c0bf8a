//! Run configuration: a TOML document with the dotted keys `model.n`,
//! `model.k`, `model.m`, `jets.r`, `perturb.delta`, `perturb.nu`,
//! `perturb.net_spacing`, `perturb.batch_distance`, `grid.spacing`, `seed`
//! and `output.dir`. Missing keys take defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub jets: JetsConfig,
    #[serde(default)]
    pub perturb: PerturbConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A single degree or a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Degrees {
    One(u32),
    Sweep(Vec<u32>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_k")]
    pub k: Degrees,
    #[serde(default)]
    pub m: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetsConfig {
    #[serde(default)]
    pub r: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_nu")]
    pub nu: u32,
    #[serde(default = "default_net_spacing")]
    pub net_spacing: f64,
    #[serde(default = "default_batch_distance")]
    pub batch_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_spacing")]
    pub spacing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_n() -> usize {
    1
}
fn default_k() -> Degrees {
    Degrees::One(3)
}
fn default_delta() -> f64 {
    0.5
}
fn default_nu() -> u32 {
    3
}
fn default_net_spacing() -> f64 {
    1.0
}
fn default_batch_distance() -> f64 {
    6.0
}
fn default_spacing() -> f64 {
    0.03
}
fn default_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n: default_n(),
            k: default_k(),
            m: 0,
        }
    }
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            delta: default_delta(),
            nu: default_nu(),
            net_spacing: default_net_spacing(),
            batch_distance: default_batch_distance(),
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            spacing: default_spacing(),
        }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir() }
    }
}

impl RunConfig {
    /// Config for one `(n, k, m, r, delta)` with all other keys defaulted.
    pub fn single(n: usize, k: u32, m: usize, r: usize, delta: f64) -> Self {
        RunConfig {
            model: ModelConfig { n, k: Degrees::One(k), m },
            jets: JetsConfig { r },
            perturb: PerturbConfig {
                delta,
                ..PerturbConfig::default()
            },
            ..RunConfig::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Parse `text` and apply `key=value` overrides. Keys are dotted paths
    /// and values TOML literals (`model.k=[3,5]`, `seed=2`). `defaults`
    /// are applied first and only where `text` leaves the key unset.
    pub fn from_toml_with_overrides(text: &str, defaults: &[(&str, &str)], overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (key, value) in defaults {
            if lookup(&table, key).is_none() {
                set_dotted(&mut table, key, value)?;
            }
        }
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            set_dotted(&mut table, key.trim(), value.trim())?;
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn degrees(&self) -> Vec<u32> {
        match &self.model.k {
            Degrees::One(k) => vec![*k],
            Degrees::Sweep(ks) => ks.clone(),
        }
    }

    /// The same configuration restricted to one degree.
    pub fn with_degree(&self, k: u32) -> Self {
        RunConfig {
            model: ModelConfig {
                k: Degrees::One(k),
                ..self.model.clone()
            },
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(1..=2).contains(&self.model.n) {
            return bad(format!("model.n = {} not in {{1, 2}}", self.model.n));
        }
        if self.model.m > 2 {
            return bad(format!("model.m = {} exceeds 2", self.model.m));
        }
        let ks = self.degrees();
        if ks.is_empty() || ks.contains(&0) {
            return bad("model.k must list positive degrees".into());
        }
        if self.jets.r > 2 {
            return bad(format!("jets.r = {} exceeds 2", self.jets.r));
        }
        if !(self.perturb.delta > 0.0 && self.perturb.delta < 1.0) {
            return bad(format!("perturb.delta = {} not in (0, 1)", self.perturb.delta));
        }
        if self.perturb.nu == 0 {
            return bad("perturb.nu must be positive".into());
        }
        if !(self.perturb.net_spacing > 0.0) {
            return bad("perturb.net_spacing must be positive".into());
        }
        if !(self.perturb.batch_distance >= 0.0) {
            return bad("perturb.batch_distance must be non-negative".into());
        }
        if !(self.grid.spacing > 0.0 && self.grid.spacing <= crate::transversality::MAX_SPACING) {
            return bad(format!(
                "grid.spacing = {} not in (0, {}]",
                self.grid.spacing,
                crate::transversality::MAX_SPACING
            ));
        }
        Ok(())
    }
}

fn lookup<'a>(table: &'a toml::Table, key: &str) -> Option<&'a toml::Value> {
    let mut parts = key.split('.');
    let mut cur = table.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}

fn set_dotted(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parsed: toml::Table = toml::from_str(&format!("v = {value}")).map_err(|e| Error::Config(format!("{key}: {e}")))?;
    let value = parsed["v"].clone();
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key}: `{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
