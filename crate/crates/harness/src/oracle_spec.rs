use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use anyhow::{Context, Result};
use iqa_attack::wire::{Transport, WireOracle};
use iqa_attack::{Bounds, BuiltinScorer, QualityOracle};

/// Which scorer to attack: `builtin:NAME`, `cmd:SHELL COMMAND` or
/// `tcp:HOST:PORT`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleSpec {
    Builtin(BuiltinScorer),
    External(Transport),
}

impl OracleSpec {
    /// Opens a fresh oracle. Each worker calls this once so that external
    /// scorers get one connection per job.
    pub fn connect(&self, bounds: Bounds, timeout: Duration) -> Result<Box<dyn QualityOracle<f64>>> {
        match self {
            OracleSpec::Builtin(s) => Ok(s.build(bounds)),
            OracleSpec::External(t) => {
                let oracle = WireOracle::connect(t, bounds, timeout)
                    .with_context(|| format!("connecting to oracle {t}"))?;
                Ok(Box::new(oracle))
            }
        }
    }
}

impl fmt::Display for OracleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleSpec::Builtin(s) => write!(f, "builtin:{s}"),
            OracleSpec::External(t) => write!(f, "{t}"),
        }
    }
}

impl FromStr for OracleSpec {
    type Err = iqa_attack::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix("builtin:") {
            Some(name) => Ok(OracleSpec::Builtin(name.parse()?)),
            None => Ok(OracleSpec::External(s.parse()?)),
        }
    }
}
