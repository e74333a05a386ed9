use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::Variant;
use crate::error::{Result, VortexError};

/// The experiments the runner knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Stationarity,
    EntropyDecay,
    RadiusLaw,
    Pairlog,
    Moments,
    LimitLaw,
    Reversal,
    Scaling,
    CollisionBound,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Stationarity,
        Command::EntropyDecay,
        Command::RadiusLaw,
        Command::Pairlog,
        Command::Moments,
        Command::LimitLaw,
        Command::Reversal,
        Command::Scaling,
        Command::CollisionBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Stationarity => "stationarity",
            Command::EntropyDecay => "entropy-decay",
            Command::RadiusLaw => "radius-law",
            Command::Pairlog => "pairlog",
            Command::Moments => "moments",
            Command::LimitLaw => "limit-law",
            Command::Reversal => "reversal",
            Command::Scaling => "scaling",
            Command::CollisionBound => "collision-bound",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = VortexError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
            VortexError::Config(format!("unknown command '{s}'{}", suggestion(s, &names)))
        })
    }
}

/// How replicas are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Point,
    Gaussian,
    Stationary,
}

impl FromStr for InitKind {
    type Err = VortexError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "point" => Ok(InitKind::Point),
            "gaussian" => Ok(InitKind::Gaussian),
            "stationary" => Ok(InitKind::Stationary),
            other => Err(VortexError::Config(format!("unknown init '{other}' (expected point, gaussian or stationary)"))),
        }
    }
}

/// A parsed run configuration.
///
/// Keys without a fixed default are optional here and resolved per command;
/// see [`RunConfig::horizon_or`] and friends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub n: usize,
    pub a: Vec<f64>,
    pub nu: f64,
    pub variant: Option<Variant>,
    pub dt: f64,
    pub horizon: Option<f64>,
    pub eps: f64,
    pub replicas: Option<usize>,
    pub t_trunc: f64,
    pub k: usize,
    pub n_permutations: usize,
    pub n_samples: Option<usize>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub init: Option<InitKind>,
    /// Flattened initial means `x₁, y₁, …, x_n, y_n`.
    pub init_mean: Option<Vec<f64>>,
    pub init_var: Option<f64>,
    pub times: Option<Vec<f64>>,
    pub eps_list: Option<Vec<f64>>,
}

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_EPS: f64 = 1e-2;
pub const DEFAULT_T_TRUNC: f64 = 20.0;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_PERMUTATIONS: usize = 500;
pub const DEFAULT_SEED: u64 = 0;

/// Every accepted key with the section it belongs to.
const KEYS: [(&str, &str); 20] = [
    ("n", "system"),
    ("a", "system"),
    ("nu", "system"),
    ("variant", "system"),
    ("init", "system"),
    ("init_mean", "system"),
    ("init_var", "system"),
    ("dt", "sim"),
    ("horizon", "sim"),
    ("eps", "sim"),
    ("replicas", "sim"),
    ("t_trunc", "sim"),
    ("times", "sim"),
    ("k", "est"),
    ("n_permutations", "est"),
    ("n_samples", "est"),
    ("eps_list", "est"),
    ("out_dir", "run"),
    ("command", "run"),
    ("seed", "run"),
];

const REQUIRED: [&str; 3] = ["n", "a", "nu"];

fn suggestion(input: &str, candidates: &[&str]) -> String {
    candidates
        .iter()
        .map(|c| (strsim::jaro_winkler(input, c), *c))
        .filter(|(score, _)| *score >= 0.7)
        .max_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(_, c)| format!("; did you mean '{c}'?"))
        .unwrap_or_default()
}

fn parse_value<T: FromStr>(key: &str, raw: &str, line: usize) -> Result<T>
where
    T::Err: fmt::Display,
{
    raw.parse::<T>().map_err(|e| VortexError::Config(format!("line {line}: invalid value '{raw}' for '{key}': {e}")))
}

fn parse_list(key: &str, raw: &str, line: usize) -> Result<Vec<f64>> {
    raw.split(',').map(|item| parse_value::<f64>(key, item.trim(), line)).collect()
}

impl RunConfig {
    /// Parses the flat `key = value` format. `[section]` headers are optional,
    /// but a key placed under a header must belong to that section. `#`
    /// starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let section_names = ["system", "sim", "est", "run"];
        let mut section: Option<String> = None;
        let mut entries: Vec<(&'static str, String, usize)> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| VortexError::Config(format!("line {line_no}: malformed section header '{line}'")))?
                    .trim();
                if !section_names.contains(&name) {
                    return Err(VortexError::Config(format!(
                        "line {line_no}: unknown section [{name}]{}",
                        suggestion(name, &section_names)
                    )));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| VortexError::Config(format!("line {line_no}: expected 'key = value', got '{line}'")))?;
            let key = key.trim();
            let value = value.trim();
            let Some(&(known, home)) = KEYS.iter().find(|(k, _)| *k == key) else {
                let names: Vec<&str> = KEYS.iter().map(|(k, _)| *k).collect();
                return Err(VortexError::Config(format!("line {line_no}: unknown key '{key}'{}", suggestion(key, &names))));
            };
            if let Some(s) = &section {
                if s != home {
                    return Err(VortexError::Config(format!("line {line_no}: key '{key}' belongs in [{home}], not [{s}]")));
                }
            }
            if value.is_empty() {
                return Err(VortexError::Config(format!("line {line_no}: key '{key}' has no value")));
            }
            if entries.iter().any(|(k, _, _)| *k == known) {
                return Err(VortexError::Config(format!("line {line_no}: key '{key}' given twice")));
            }
            entries.push((known, value.to_string(), line_no));
        }
        for req in REQUIRED {
            if !entries.iter().any(|(k, _, _)| *k == req) {
                return Err(VortexError::Config(format!("missing required key '{req}'")));
            }
        }

        let mut cfg = RunConfig {
            command: None,
            n: 0,
            a: Vec::new(),
            nu: 0.0,
            variant: None,
            dt: DEFAULT_DT,
            horizon: None,
            eps: DEFAULT_EPS,
            replicas: None,
            t_trunc: DEFAULT_T_TRUNC,
            k: DEFAULT_K,
            n_permutations: DEFAULT_PERMUTATIONS,
            n_samples: None,
            out_dir: PathBuf::from("."),
            seed: DEFAULT_SEED,
            init: None,
            init_mean: None,
            init_var: None,
            times: None,
            eps_list: None,
        };
        for (key, value, line) in &entries {
            let (key, v, line) = (*key, value.as_str(), *line);
            match key {
                "n" => cfg.n = parse_value(key, v, line)?,
                "a" => cfg.a = parse_list(key, v, line)?,
                "nu" => cfg.nu = parse_value(key, v, line)?,
                "variant" => cfg.variant = Some(v.parse().map_err(|e: VortexError| VortexError::Config(format!("line {line}: {e}")))?),
                "init" => cfg.init = Some(v.parse()?),
                "init_mean" => cfg.init_mean = Some(parse_list(key, v, line)?),
                "init_var" => cfg.init_var = Some(parse_value(key, v, line)?),
                "dt" => cfg.dt = parse_value(key, v, line)?,
                "horizon" => cfg.horizon = Some(parse_value(key, v, line)?),
                "eps" => cfg.eps = parse_value(key, v, line)?,
                "replicas" => cfg.replicas = Some(parse_value(key, v, line)?),
                "t_trunc" => cfg.t_trunc = parse_value(key, v, line)?,
                "times" => cfg.times = Some(parse_list(key, v, line)?),
                "k" => cfg.k = parse_value(key, v, line)?,
                "n_permutations" => cfg.n_permutations = parse_value(key, v, line)?,
                "n_samples" => cfg.n_samples = Some(parse_value(key, v, line)?),
                "eps_list" => cfg.eps_list = Some(parse_list(key, v, line)?),
                "out_dir" => cfg.out_dir = PathBuf::from(v),
                "command" => cfg.command = Some(v.parse()?),
                "seed" => cfg.seed = parse_value(key, v, line)?,
                _ => unreachable!("key table and match arms disagree"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the invariants that do not depend on the command.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(VortexError::Config(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.a.len() != self.n {
            return bad(format!("a has {} values but n = {}", self.a.len(), self.n));
        }
        if self.a.iter().any(|x| !x.is_finite()) {
            return bad("vorticities must be finite".into());
        }
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return bad(format!("nu must be positive, got {}", self.nu));
        }
        for (name, value) in [("dt", Some(self.dt)), ("eps", Some(self.eps)), ("horizon", self.horizon), ("t_trunc", Some(self.t_trunc))] {
            if let Some(x) = value {
                if !(x > 0.0) || !x.is_finite() {
                    return bad(format!("{name} must be positive, got {x}"));
                }
            }
        }
        if self.replicas == Some(0) || self.n_samples == Some(0) {
            return bad("replicas and n_samples must be at least 1".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if let Some(m) = &self.init_mean {
            if m.len() != 2 * self.n {
                return bad(format!("init_mean has {} values but 2n = {}", m.len(), 2 * self.n));
            }
        }
        if let Some(v) = self.init_var {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("init_var must be non-negative, got {v}"));
            }
        }
        if let Some(t) = &self.times {
            if t.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) || t.windows(2).any(|w| w[1] < w[0]) {
                return bad("times must be non-negative and non-decreasing".into());
            }
        }
        if let Some(e) = &self.eps_list {
            if e.is_empty() || e.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
                return bad("eps_list values must lie in (0, 1)".into());
            }
        }
        Ok(())
    }

    pub fn horizon_or(&self, default: f64) -> f64 {
        self.horizon.unwrap_or(default)
    }

    pub fn replicas_or(&self, default: usize) -> usize {
        self.replicas.unwrap_or(default)
    }

    pub fn n_samples_or(&self, default: usize) -> usize {
        self.n_samples.unwrap_or(default)
    }
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| VortexError::Config(format!("cannot read config {}: {e}", path.display())))?;
    RunConfig::parse(&text)
}
