//! Configuration resolution: defaults, then a key=value file, then explicit
//! command-line flags (flags win). Unknown file keys are rejected.

use std::path::PathBuf;

/// Seed request: a number, or an explicit "none" (field must come from --in).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedChoice {
    None,
    Value(u64),
}

/// Fully merged configuration; per-command validation picks what it needs.
#[derive(Debug, Clone, Default)]
pub struct Resolved {
    pub d: Option<usize>,
    pub m: Option<i32>,
    pub r: Option<i64>,
    pub r_ref: Option<i64>,
    pub s: Option<f64>,
    pub s_list: Option<Vec<f64>>,
    pub r_list: Option<Vec<i64>>,
    pub steps: Option<usize>,
    pub tableau: Option<String>,
    pub seed: Option<SeedChoice>,
    pub eps: Option<f64>,
    pub r_inner: Option<i64>,
    pub n_flow: Option<usize>,
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub literal_real_draw: bool,
}

/// A configuration-level failure; maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, raw: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|e| ConfigError(format!("key {key}: bad entry {t:?}: {e}")))
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| ConfigError(format!("key {key}: bad value {raw:?}: {e}")))
}

pub fn parse_seed(raw: &str) -> Result<SeedChoice, ConfigError> {
    if raw == "none" {
        Ok(SeedChoice::None)
    } else {
        raw.parse::<u64>()
            .map(SeedChoice::Value)
            .map_err(|e| ConfigError(format!("key seed: bad value {raw:?} (integer or \"none\"): {e}")))
    }
}

impl Resolved {
    /// Applies one key=value pair from a configuration file. Keys carry the
    /// long flag names. Unknown keys are rejected by name.
    pub fn apply_file_entry(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "d" => self.d = Some(parse_scalar(key, value)?),
            "m" => self.m = Some(parse_scalar(key, value)?),
            "R" => self.r = Some(parse_scalar(key, value)?),
            "R-ref" => self.r_ref = Some(parse_scalar(key, value)?),
            "s" => self.s = Some(parse_scalar(key, value)?),
            "s-list" => self.s_list = Some(parse_list(key, value)?),
            "R-list" => self.r_list = Some(parse_list(key, value)?),
            "steps" => self.steps = Some(parse_scalar(key, value)?),
            "tableau" => self.tableau = Some(value.to_string()),
            "seed" => self.seed = Some(parse_seed(value)?),
            "eps" => self.eps = Some(parse_scalar(key, value)?),
            "r-inner" => self.r_inner = Some(parse_scalar(key, value)?),
            "N-flow" => self.n_flow = Some(parse_scalar(key, value)?),
            "in" => self.input = Some(PathBuf::from(value)),
            "out-dir" => self.out_dir = Some(PathBuf::from(value)),
            "literal-real-draw" => {
                self.literal_real_draw = parse_scalar::<bool>(key, value)?;
            }
            other => {
                return Err(ConfigError(format!("unknown configuration key: {other}")));
            }
        }
        Ok(())
    }

    /// Loads a key=value file: one pair per line, `#` comments, blank lines
    /// ignored.
    pub fn load_file(&mut self, path: &std::path::Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config file {}: {e}", path.display())))?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!(
                    "{}:{}: expected key = value, found {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.apply_file_entry(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn require<T: Copy>(field: Option<T>, key: &str) -> Result<T, ConfigError> {
        field.ok_or_else(|| ConfigError(format!("missing required key: {key}")))
    }

    pub fn require_ref<'a, T>(field: &'a Option<T>, key: &str) -> Result<&'a T, ConfigError> {
        field
            .as_ref()
            .ok_or_else(|| ConfigError(format!("missing required key: {key}")))
    }

    /// The resolved tableau name (default dopri5).
    pub fn tableau_name(&self) -> &str {
        self.tableau.as_deref().unwrap_or("dopri5")
    }

    /// The resolved tail exponent (default 0.1).
    pub fn tail_exponent(&self) -> f64 {
        self.eps.unwrap_or(0.1)
    }

    /// The resolved output directory (default: current directory).
    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// Key = value echo of every set field, for CSV comment headers.
    pub fn echo(&self, command: &str) -> Vec<String> {
        let mut lines = vec![format!("command = {command}")];
        let mut push = |key: &str, val: Option<String>| {
            if let Some(v) = val {
                lines.push(format!("{key} = {v}"));
            }
        };
        push("d", self.d.map(|v| v.to_string()));
        push("m", self.m.map(|v| v.to_string()));
        push("R", self.r.map(|v| v.to_string()));
        push("R-ref", self.r_ref.map(|v| v.to_string()));
        push("s", self.s.map(|v| v.to_string()));
        push(
            "s-list",
            self.s_list.as_ref().map(|v| {
                v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
            }),
        );
        push(
            "R-list",
            self.r_list.as_ref().map(|v| {
                v.iter().map(i64::to_string).collect::<Vec<_>>().join(",")
            }),
        );
        push("steps", self.steps.map(|v| v.to_string()));
        push("tableau", Some(self.tableau_name().to_string()));
        push(
            "seed",
            self.seed.map(|v| match v {
                SeedChoice::None => "none".to_string(),
                SeedChoice::Value(k) => k.to_string(),
            }),
        );
        push("eps", Some(self.tail_exponent().to_string()));
        push("r-inner", self.r_inner.map(|v| v.to_string()));
        push("N-flow", self.n_flow.map(|v| v.to_string()));
        push("in", self.input.as_ref().map(|p| p.display().to_string()));
        push("out-dir", Some(self.out_dir().display().to_string()));
        push(
            "literal-real-draw",
            Some(self.literal_real_draw.to_string()),
        );
        lines
    }
}
