//! Engine configuration and its flat `key = value` file format.
//!
//! ```text
//! # comments and blank lines are ignored
//! a = 0.998
//! lambda = 1
//! v = 1000
//! beta = 0.0021
//! r = 0.3
//! tau0 = 5
//! alpha = auto
//! init_cell_count = 20
//! sweep_interval = 1000
//! recycle = on
//! filters = both
//! seed = 7
//! ```

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cellspace::{Distance, TimeOrder};
use crate::decay::DecayParams;
use crate::dptree::FilterMode;
use crate::error::{Error, Result};

pub const KEYS: [&str; 12] = [
    "a",
    "lambda",
    "v",
    "beta",
    "r",
    "tau0",
    "alpha",
    "init_cell_count",
    "sweep_interval",
    "recycle",
    "filters",
    "seed",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub decay: DecayParams,
    /// Cell radius.
    pub r: f64,
    /// Operator-chosen initial threshold.
    pub tau0: Option<f64>,
    /// Fixed `α`; learned from `τ⁰` when absent.
    pub alpha: Option<f64>,
    pub init_cell_count: usize,
    /// Points between sweeps, threshold reselection, and snapshot diffs.
    pub sweep_interval: u64,
    pub recycle: bool,
    pub filters: FilterMode,
    pub seed: u64,

    // Settings without a config key; set from code or command-line flags.
    /// Reselect `τ` at each sweep; when false `τ` stays at `τ⁰`.
    pub adaptive_tau: bool,
    pub grid_index: bool,
    /// Break equidistant-seed ties at random (seeded by `seed`).
    pub random_ties: bool,
    pub time_order: TimeOrder,
    pub metric: Distance,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            decay: DecayParams::default(),
            r: 0.3,
            tau0: None,
            alpha: None,
            init_cell_count: 20,
            sweep_interval: 1000,
            recycle: true,
            filters: FilterMode::Both,
            seed: 0,
            adaptive_tau: true,
            grid_index: false,
            random_ties: false,
            time_order: TimeOrder::Reject,
            metric: Distance::Euclidean,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.decay.validate()?;
        let bad = |m: String| Err(Error::InvalidParam(m));
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad(format!("r = {} must be > 0", self.r));
        }
        if let Some(tau0) = self.tau0 {
            if !(tau0 > 0.0) {
                return bad(format!("tau0 = {tau0} must be > 0"));
            }
        }
        if let Some(alpha) = self.alpha {
            if !(alpha > 0.0 && alpha < 1.0) {
                return bad(format!("alpha = {alpha} must lie in (0, 1)"));
            }
        }
        if self.init_cell_count < 2 {
            return bad(format!("init_cell_count = {} must be >= 2", self.init_cell_count));
        }
        if self.sweep_interval == 0 {
            return bad("sweep_interval must be >= 1".into());
        }
        Ok(())
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::InvalidParam(format!("{key}: cannot parse {value:?}")))
        }
        match key {
            "a" => self.decay.a = num(key, value)?,
            "lambda" => self.decay.lambda = num(key, value)?,
            "v" => self.decay.v = num(key, value)?,
            "beta" => self.decay.beta = num(key, value)?,
            "r" => self.r = num(key, value)?,
            "tau0" => self.tau0 = Some(num(key, value)?),
            "alpha" => {
                self.alpha = match value {
                    "auto" | "" => None,
                    _ => Some(num(key, value)?),
                }
            }
            "init_cell_count" => self.init_cell_count = num(key, value)?,
            "sweep_interval" => self.sweep_interval = num(key, value)?,
            "recycle" => {
                self.recycle = match value {
                    "on" | "true" | "1" => true,
                    "off" | "false" | "0" => false,
                    _ => return Err(Error::InvalidParam(format!("recycle: {value:?} is not on/off"))),
                }
            }
            "filters" => self.filters = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            _ => return Err(Error::InvalidParam(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Parses the flat format on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = EngineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected key = value, got {raw:?}"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Stable fingerprint of every setting that affects clustering output.
    /// Execution strategies (filters, grid index, recycling) are left out so
    /// their outputs stay comparable.
    pub fn fingerprint(&self) -> u64 {
        let mut s = String::new();
        let d = &self.decay;
        let _ = write!(
            s,
            "{:e}|{:e}|{:e}|{:e}|{:e}|{:?}|{:?}|{}|{}|{}|{}|{}|{:?}|{:?}",
            d.a,
            d.lambda,
            d.v,
            d.beta,
            self.r,
            self.tau0,
            self.alpha,
            self.init_cell_count,
            self.sweep_interval,
            self.seed,
            self.adaptive_tau,
            self.random_ties,
            self.time_order,
            self.metric,
        );
        fnv1a(s.as_bytes())
    }
}

impl fmt::Display for EngineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = &self.decay;
        writeln!(f, "a = {}", d.a)?;
        writeln!(f, "lambda = {}", d.lambda)?;
        writeln!(f, "v = {}", d.v)?;
        writeln!(f, "beta = {}", d.beta)?;
        writeln!(f, "r = {}", self.r)?;
        if let Some(tau0) = self.tau0 {
            writeln!(f, "tau0 = {tau0}")?;
        }
        match self.alpha {
            Some(alpha) => writeln!(f, "alpha = {alpha}")?,
            None => writeln!(f, "alpha = auto")?,
        }
        writeln!(f, "init_cell_count = {}", self.init_cell_count)?;
        writeln!(f, "sweep_interval = {}", self.sweep_interval)?;
        writeln!(f, "recycle = {}", if self.recycle { "on" } else { "off" })?;
        writeln!(f, "filters = {}", self.filters)?;
        writeln!(f, "seed = {}", self.seed)
    }
}

impl FromStr for FilterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(FilterMode::Both),
            "density-only" | "density_only" => Ok(FilterMode::DensityOnly),
            "off" => Ok(FilterMode::Off),
            _ => Err(Error::InvalidParam(format!(
                "filters: {s:?} is not one of both, density-only, off"
            ))),
        }
    }
}

impl fmt::Display for FilterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterMode::Both => "both",
            FilterMode::DensityOnly => "density-only",
            FilterMode::Off => "off",
        })
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
