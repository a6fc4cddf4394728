//! `key=value` run configuration files.
//!
//! Keys are the long flag names without the leading dashes. Blank lines and
//! lines starting with `#` are ignored; whitespace around keys and values is
//! trimmed. Each key may appear once. Values are type-checked on parse, so a
//! file that parses can always be applied.

use std::fmt;
use std::str::FromStr;

use clap::ValueEnum;

use crate::args::{ArchArg, NormArg, OptimizerArg, PositionalArg, PrecisionArg};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.msg)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy)]
enum Kind {
    Count,
    Seed,
    Real,
    Bool,
    Arch,
    Optimizer,
    Precision,
    Positional,
    Norm,
}

const KEYS: &[(&str, Kind)] = &[
    ("arch", Kind::Arch),
    ("max-len", Kind::Count),
    ("layers", Kind::Count),
    ("dec-layers", Kind::Count),
    ("heads", Kind::Count),
    ("d-e", Kind::Count),
    ("d-attn", Kind::Count),
    ("d-mid", Kind::Count),
    ("d-mlp", Kind::Count),
    ("d-f", Kind::Count),
    ("positional", Kind::Positional),
    ("tied", Kind::Bool),
    ("norm", Kind::Norm),
    ("epochs", Kind::Count),
    ("lr", Kind::Real),
    ("optimizer", Kind::Optimizer),
    ("beta1", Kind::Real),
    ("beta2", Kind::Real),
    ("adam-eps", Kind::Real),
    ("p-mask", Kind::Real),
    ("seed", Kind::Seed),
    ("log-every", Kind::Count),
    ("precision", Kind::Precision),
    ("tau", Kind::Real),
    ("len", Kind::Count),
    ("max-steps", Kind::Count),
];

fn check(kind: Kind, v: &str) -> Result<(), String> {
    fn parse<T: FromStr>(v: &str, what: &str) -> Result<(), String> {
        v.parse::<T>().map(drop).map_err(|_| format!("expected {what}, got {v:?}"))
    }
    fn choice<T: ValueEnum>(v: &str) -> Result<(), String> {
        T::from_str(v, false).map(drop)
    }
    match kind {
        Kind::Count => parse::<usize>(v, "a non-negative integer"),
        Kind::Seed => parse::<u64>(v, "a 64-bit seed"),
        Kind::Real => match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(()),
            _ => Err(format!("expected a finite number, got {v:?}")),
        },
        Kind::Bool => parse::<bool>(v, "true or false"),
        Kind::Arch => choice::<ArchArg>(v),
        Kind::Optimizer => choice::<OptimizerArg>(v),
        Kind::Precision => choice::<PrecisionArg>(v),
        Kind::Positional => choice::<PositionalArg>(v),
        Kind::Norm => choice::<NormArg>(v),
    }
}

/// A parsed configuration file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| ConfigError { line: n + 1, msg };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            let kind = KEYS
                .iter()
                .find(|(name, _)| *name == k)
                .map(|&(_, kind)| kind)
                .ok_or_else(|| err(format!("unknown key {k:?}")))?;
            if entries.iter().any(|(key, _)| key == k) {
                return Err(err(format!("duplicate key {k:?}")));
            }
            check(kind, v).map_err(|m| err(format!("{k}: {m}")))?;
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(ConfigFile { entries })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        debug_assert!(KEYS.iter().any(|(k, _)| *k == key), "unregistered key {key}");
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Value of a numeric or boolean key.
    pub fn get<T: FromStr>(&self, key: &str) -> Option<T> {
        self.raw(key).map(|v| v.parse().ok().expect("checked on parse"))
    }

    /// Value of a key that names a choice.
    pub fn choice<T: ValueEnum>(&self, key: &str) -> Option<T> {
        self.raw(key).map(|v| T::from_str(v, false).expect("checked on parse"))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
