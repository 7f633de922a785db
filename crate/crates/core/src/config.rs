//! Flat `key = value` configuration files with `#` comments.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::covariance::{CovarianceModel, ModelKind};
use crate::error::{Error, Result};
use crate::hquad::{DiagonalHandling, QuadratureSpec};

pub const MODEL_KEYS: &[&str] = &[
    "model.kind",
    "model.beta",
    "model.hprime",
    "model.kexp",
    "model.normalized",
];

pub const QUAD_KEYS: &[&str] = &["quad.panels", "quad.order", "quad.diagonal", "quad.tol"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return None;
    }
    Some((k, v))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = split_pair(line)
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", no + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> Result<()> {
        let (k, v) =
            split_pair(pair).ok_or_else(|| Error::Config(format!("bad override `{pair}`")))?;
        self.set(k, v);
        Ok(())
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("cannot parse `{key} = {v}`")))
            })
            .transpose()
    }

    pub fn parsed_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parsed(key)?
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    /// Comma- or whitespace-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(v) = self.get(key) else {
            return Ok(None);
        };
        v.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>()
                    .map_err(|_| Error::Config(format!("cannot parse `{s}` in `{key}`")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Errors on the first key not in any of `allowed`.
    pub fn reject_unknown(&self, allowed: &[&[&str]]) -> Result<()> {
        for k in self.keys() {
            if !allowed.iter().any(|set| set.contains(&k)) {
                return Err(Error::Config(format!("unknown key `{k}`")));
            }
        }
        Ok(())
    }
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("not a boolean: `{other}`"))),
    }
}

impl Config {
    pub fn flag(&self, key: &str, default: bool) -> Result<bool> {
        self.get(key).map_or(Ok(default), parse_bool)
    }
}

/// Model from the `model.*` keys; fbm with `β = 0.6` when absent.
pub fn model_from_config(cfg: &Config) -> Result<CovarianceModel> {
    let kind: ModelKind = cfg
        .parsed("model.kind")?
        .unwrap_or(ModelKind::Fbm);
    let wrap = |e: Error| match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    };
    match kind {
        ModelKind::Fbm => CovarianceModel::fbm(cfg.parsed_or("model.beta", 0.6)?).map_err(wrap),
        ModelKind::Subfbm => CovarianceModel::subfbm(
            cfg.parsed_or("model.beta", 0.6)?,
            cfg.flag("model.normalized", false)?,
        )
        .map_err(wrap),
        ModelKind::Bifbm => {
            CovarianceModel::bifbm(cfg.required("model.hprime")?, cfg.required("model.kexp")?)
                .map_err(wrap)
        }
        ModelKind::Tabulated => Err(Error::Config(
            "tabulated models cannot be described in a config file".into(),
        )),
    }
}

pub fn quad_from_config(cfg: &Config) -> Result<QuadratureSpec> {
    let d = QuadratureSpec::default();
    let spec = QuadratureSpec {
        panels: cfg.parsed_or("quad.panels", d.panels)?,
        order: cfg.parsed_or("quad.order", d.order)?,
        diagonal: cfg.parsed_or::<DiagonalHandling>("quad.diagonal", d.diagonal)?,
        rel_tol: cfg.parsed_or("quad.tol", d.rel_tol)?,
    };
    spec.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(spec)
}
