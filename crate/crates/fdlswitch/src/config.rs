//! Experiment config files.
//!
//! The format is flat `key = value` text. `#` starts a comment, blank lines
//! are ignored, and repeating a list key (or giving comma-separated values)
//! builds a list:
//!
//! ```text
//! name = heavy-load
//! preset = fig2b
//! rho = 0.9
//! m = 32
//! m = 64
//! seeds = 10
//! ```
//!
//! | key | meaning |
//! |-----|---------|
//! | `name` | label, informational |
//! | `preset` | `fig2a`, `fig2b`, `fig3a`, `fig3b` or `custom` |
//! | `rho` | offered loads in `[0, 1]` (list) |
//! | `m` | Aux-I FDL counts (list) |
//! | `seed` | explicit seeds (list) |
//! | `seeds` | seed count, expands to `0..n` |
//! | `horizon`, `warmup` | slots with arrivals, slots excluded from metrics |
//! | `ablation` | run every point with and without Aux-II |
//! | `aux2` | Aux-II present (ignored under `ablation`) |
//! | `n_ports`, `k_aux2`, `max_circulations` | switch shape |
//! | `aux1_delays` | explicit Aux-I delay list, needs a single `m` of equal length |
//! | `output` | CSV path |

use std::path::PathBuf;
use std::str::FromStr;

use fdlswitch_core::RunPlan;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigurePreset {
    /// PLR vs number of Aux-I FDLs at low, moderate and heavy load.
    Fig2a,
    /// PLR vs load for m = 32 and 64.
    Fig2b,
    /// Average delay vs load for m = 16, 32 and 64.
    Fig3a,
    /// PLR with and without Aux-II vs load, m = 32.
    Fig3b,
    Custom,
}

impl FromStr for FigurePreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fig2a" => Ok(Self::Fig2a),
            "fig2b" => Ok(Self::Fig2b),
            "fig3a" => Ok(Self::Fig3a),
            "fig3b" => Ok(Self::Fig3b),
            "custom" => Ok(Self::Custom),
            other => Err(format!(
                "unknown preset `{other}` (expected fig2a, fig2b, fig3a, fig3b or custom)"
            )),
        }
    }
}

/// Load grid shared by the load-axis figures.
pub fn default_rho_grid() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

impl FigurePreset {
    pub fn rho_values(self) -> Vec<f64> {
        match self {
            Self::Fig2a => vec![0.3, 0.6, 0.9],
            Self::Fig2b | Self::Fig3a | Self::Fig3b => default_rho_grid(),
            Self::Custom => Vec::new(),
        }
    }

    pub fn m_values(self) -> Vec<usize> {
        match self {
            Self::Fig2a => (0..=16).map(|i| i * 4).collect(),
            Self::Fig2b => vec![32, 64],
            Self::Fig3a => vec![16, 32, 64],
            Self::Fig3b => vec![32],
            Self::Custom => Vec::new(),
        }
    }
}

pub const DEFAULT_SEEDS: u64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub preset: FigurePreset,
    pub rho_values: Vec<f64>,
    pub m_values: Vec<usize>,
    pub seeds: Vec<u64>,
    pub horizon: u64,
    pub warmup: u64,
    /// Pair every point with an Aux-II-less run on the same traffic.
    pub ablation: bool,
    pub aux2_enabled: bool,
    pub n_ports: usize,
    pub k_aux2: usize,
    pub max_circulations: u32,
    pub aux1_delays: Option<Vec<u32>>,
    pub output: Option<PathBuf>,
    /// Rerun loss-free points with a longer horizon until enough packets were offered.
    pub escalate_zero_plr: bool,
    /// Offered-packet floor for escalation.
    pub zero_plr_min_offered: u64,
}

impl ExperimentSpec {
    /// A spec for the given preset with every default filled in.
    pub fn preset(preset: FigurePreset) -> Self {
        Self {
            name: String::new(),
            preset,
            rho_values: preset.rho_values(),
            m_values: preset.m_values(),
            seeds: (0..DEFAULT_SEEDS).collect(),
            horizon: RunPlan::DEFAULT_HORIZON,
            warmup: RunPlan::DEFAULT_WARMUP,
            ablation: preset == FigurePreset::Fig3b,
            aux2_enabled: true,
            n_ports: 32,
            k_aux2: 2,
            max_circulations: 5,
            aux1_delays: None,
            output: None,
            escalate_zero_plr: preset == FigurePreset::Fig2a,
            zero_plr_min_offered: 10_000_000,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.rho_values.is_empty() {
            return Err(ConfigError::general("rho grid is empty"));
        }
        if self.m_values.is_empty() {
            return Err(ConfigError::general("m grid is empty"));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::general("seed list is empty"));
        }
        if let Some(rho) = self.rho_values.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(ConfigError::general(format!("rho {rho} is outside [0, 1]")));
        }
        if self.warmup >= self.horizon {
            return Err(ConfigError::general(format!(
                "warmup ({}) must be below horizon ({})",
                self.warmup, self.horizon
            )));
        }
        if self.n_ports == 0 || self.k_aux2 == 0 || self.max_circulations == 0 {
            return Err(ConfigError::general(
                "n_ports, k_aux2 and max_circulations must be positive",
            ));
        }
        if let Some(delays) = &self.aux1_delays {
            if self.m_values.len() != 1 || self.m_values[0] != delays.len() {
                return Err(ConfigError::general(
                    "aux1_delays needs exactly one m equal to its length",
                ));
            }
            if delays.contains(&0) {
                return Err(ConfigError::general(
                    "aux1_delays entries must be at least 1",
                ));
            }
        }
        Ok(())
    }
}

const KNOWN_KEYS: &[&str] = &[
    "name",
    "preset",
    "rho",
    "m",
    "seed",
    "seeds",
    "horizon",
    "warmup",
    "ablation",
    "aux2",
    "n_ports",
    "k_aux2",
    "max_circulations",
    "aux1_delays",
    "output",
];

fn parse_value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError> {
    raw.parse()
        .map_err(|_| ConfigError::at(line, format!("invalid value `{raw}` for `{key}`")))
}

fn parse_bool(line: usize, key: &str, raw: &str) -> Result<bool, ConfigError> {
    match raw {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(ConfigError::at(
            line,
            format!("`{key}` expects true or false, got `{raw}`"),
        )),
    }
}

fn list_items(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Parses and validates a config file.
pub fn parse_config(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let mut name = None;
    let mut preset = None;
    let mut rho = Vec::new();
    let mut m = Vec::new();
    let mut seed = Vec::new();
    let mut seeds = None;
    let mut scalars: Vec<(usize, &str, &str)> = Vec::new();
    let mut aux1_delays: Option<Vec<u32>> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| {
                ConfigError::at(line, format!("expected `key = value`, got `{content}`"))
            })?;
        if !KNOWN_KEYS.contains(&key) {
            return Err(ConfigError::at(
                line,
                format!(
                    "unknown key `{key}` (known keys: {})",
                    KNOWN_KEYS.join(", ")
                ),
            ));
        }
        if value.is_empty() {
            return Err(ConfigError::at(line, format!("`{key}` has no value")));
        }
        match key {
            "name" => name = Some(value.to_string()),
            "preset" => {
                preset = Some(
                    value
                        .parse::<FigurePreset>()
                        .map_err(|e| ConfigError::at(line, e))?,
                )
            }
            "rho" => {
                for item in list_items(value) {
                    let r: f64 = parse_value(line, key, item)?;
                    if !(0.0..=1.0).contains(&r) {
                        return Err(ConfigError::at(line, format!("rho {r} is outside [0, 1]")));
                    }
                    rho.push(r);
                }
            }
            "m" => {
                for item in list_items(value) {
                    m.push(parse_value(line, key, item)?);
                }
            }
            "seed" => {
                for item in list_items(value) {
                    seed.push(parse_value(line, key, item)?);
                }
            }
            "seeds" => {
                let n: u64 = parse_value(line, key, value)?;
                if n == 0 {
                    return Err(ConfigError::at(line, "seeds must be at least 1"));
                }
                seeds = Some((line, n));
            }
            "aux1_delays" => {
                let delays = aux1_delays.get_or_insert_with(Vec::new);
                for item in list_items(value) {
                    delays.push(parse_value(line, key, item)?);
                }
            }
            _ => scalars.push((line, key, value)),
        }
    }

    let explicit_grid = !rho.is_empty() && !m.is_empty();
    if preset.is_none() && !explicit_grid {
        return Err(ConfigError::general(
            "missing required keys: `preset`, or both `rho` and `m` (optional: name, seed/seeds, horizon, warmup, ablation, aux2, n_ports, k_aux2, max_circulations, aux1_delays, output)",
        ));
    }
    let preset = preset.unwrap_or(FigurePreset::Custom);
    if preset == FigurePreset::Custom && !explicit_grid {
        return Err(ConfigError::general(
            "preset `custom` requires both `rho` and `m`",
        ));
    }

    let mut spec = ExperimentSpec::preset(preset);
    spec.name = name.unwrap_or_else(|| format!("{preset:?}").to_lowercase());
    if !rho.is_empty() {
        spec.rho_values = rho;
    }
    if !m.is_empty() {
        spec.m_values = m;
    }
    match (seed.is_empty(), seeds) {
        (false, Some((line, _))) => {
            return Err(ConfigError::at(
                line,
                "give either `seed` entries or `seeds`, not both",
            ))
        }
        (false, None) => spec.seeds = seed,
        (true, Some((_, n))) => spec.seeds = (0..n).collect(),
        (true, None) => {}
    }
    spec.aux1_delays = aux1_delays;

    for (line, key, value) in scalars {
        match key {
            "horizon" => spec.horizon = parse_value(line, key, value)?,
            "warmup" => spec.warmup = parse_value(line, key, value)?,
            "ablation" => spec.ablation = parse_bool(line, key, value)?,
            "aux2" => spec.aux2_enabled = parse_bool(line, key, value)?,
            "n_ports" => spec.n_ports = parse_value(line, key, value)?,
            "k_aux2" => spec.k_aux2 = parse_value(line, key, value)?,
            "max_circulations" => spec.max_circulations = parse_value(line, key, value)?,
            "output" => spec.output = Some(PathBuf::from(value)),
            _ => unreachable!("unhandled key {key}"),
        }
    }
    spec.validate()?;
    Ok(spec)
}
