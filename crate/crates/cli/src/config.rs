//! Flat `section.key = value` configuration with per-subcommand defaults.
//!
//! Lines starting with `#` and blank lines are ignored. Every key must be one
//! of [`KEYS`]; the resolved configuration (defaults plus overrides) is
//! embedded verbatim in every report.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use crate::Subcommand;

/// Recognized keys with their defaults.
const KEYS: &[(&str, &str)] = &[
    ("model.kind", "rotated-log"),
    ("model.w", "16"),
    ("model.w_list", "8,16,32,64"),
    ("model.a", "1"),
    ("model.b", "1"),
    ("model.b_im", "0"),
    ("model.v2", "2"),
    ("model.v2_im", "0"),
    ("model.zeta_arg", "solve"),
    ("model.domain", "6"),
    ("solver.tol", "1e-10"),
    ("solver.resolution_tol", "1e-10"),
    ("solver.max_iters", "20000"),
    ("solver.seed", "1592598547"),
    ("solver.threads", "0"),
    ("experiment.j_max", "5"),
    ("experiment.k", "1"),
    ("experiment.n_max", "40"),
    ("experiment.m", "1"),
    ("experiment.n", "1"),
    ("experiment.f", "x"),
    ("experiment.g", "x"),
    ("experiment.observables", "one,x,x2,log-moment"),
    ("output.csv", ""),
    ("output.json", ""),
];

/// Defaults that differ by subcommand.
fn subcommand_defaults(sub: Subcommand) -> &'static [(&'static str, &'static str)] {
    match sub {
        Subcommand::Oracle => &[
            ("model.kind", "harmonic"),
            ("model.w", "3"),
            ("model.a", "2"),
            ("model.b", "0"),
            ("model.zeta_arg", "0"),
        ],
        Subcommand::Correlate => &[("model.a", "2")],
        Subcommand::CheckContour => &[
            ("model.a", "2"),
            ("model.w", "2"),
            ("model.zeta_arg", "0.2617993877991494"),
            ("experiment.f", "x2"),
        ],
        _ => &[],
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<transfer_core::Error> for ConfigError {
    fn from(e: transfer_core::Error) -> Self {
        ConfigError(e.to_string())
    }
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Defaults, then the file, then `key=value` overrides.
    pub fn load(sub: Subcommand, path: Option<&Path>, overrides: &[String]) -> ConfigResult<Self> {
        let mut values: BTreeMap<String, String> = KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        for (k, v) in subcommand_defaults(sub) {
            values.insert(k.to_string(), v.to_string());
        }
        let mut apply = |line: &str, origin: &str| -> ConfigResult<()> {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                return Ok(());
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("{origin}: expected key=value, got '{line}'")))?;
            let k = k.trim();
            if !values.contains_key(k) {
                return Err(ConfigError(format!("{origin}: unknown key '{k}'")));
            }
            values.insert(k.to_string(), v.trim().to_string());
            Ok(())
        };
        if let Some(p) = path {
            let text =
                std::fs::read_to_string(p).map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?;
            for (i, line) in text.lines().enumerate() {
                apply(line, &format!("{}:{}", p.display(), i + 1))?;
            }
        }
        for o in overrides {
            apply(o, "--set")?;
        }
        let cfg = RunConfig { values };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn f64(&self, key: &str) -> ConfigResult<f64> {
        let raw = self.raw(key);
        let v: f64 = raw
            .parse()
            .map_err(|_| ConfigError(format!("{key} = '{raw}' is not a number")))?;
        if !v.is_finite() {
            return Err(ConfigError(format!("{key} must be finite")));
        }
        Ok(v)
    }

    pub fn positive(&self, key: &str) -> ConfigResult<f64> {
        let v = self.f64(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(ConfigError(format!("{key} must be positive, got {v}")))
        }
    }

    pub fn usize(&self, key: &str) -> ConfigResult<usize> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| ConfigError(format!("{key} = '{raw}' is not a nonnegative integer")))
    }

    pub fn u64(&self, key: &str) -> ConfigResult<u64> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| ConfigError(format!("{key} = '{raw}' is not a nonnegative integer")))
    }

    pub fn list(&self, key: &str) -> Vec<String> {
        self.raw(key)
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    }

    pub fn w_list(&self) -> ConfigResult<Vec<f64>> {
        let ws = self
            .list("model.w_list")
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| ConfigError(format!("model.w_list entry '{s}' is not a number")))
            })
            .collect::<ConfigResult<Vec<f64>>>()?;
        if ws.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(ConfigError("model.w_list entries must be positive".into()));
        }
        if ws.windows(2).any(|p| !(p[0] < p[1])) {
            return Err(ConfigError("model.w_list must be increasing".into()));
        }
        Ok(ws)
    }

    pub fn output_path(&self, key: &str, sub: Subcommand, ext: &str) -> PathBuf {
        match self.raw(key) {
            "" => PathBuf::from(format!("{}.{ext}", sub.name())),
            p => PathBuf::from(p),
        }
    }

    /// Checks every numeric field against the preconditions of the
    /// operations it feeds.
    fn validate(&self) -> ConfigResult<()> {
        match self.raw("model.kind") {
            "harmonic" | "rotated-log" | "quadratic" => {}
            other => {
                return Err(ConfigError(format!(
                    "model.kind '{other}' is not harmonic, rotated-log or quadratic"
                )))
            }
        }
        self.positive("model.w")?;
        self.w_list()?;
        self.positive("model.a")?;
        self.f64("model.b")?;
        self.f64("model.b_im")?;
        self.f64("model.v2")?;
        self.f64("model.v2_im")?;
        self.positive("model.domain")?;
        match self.raw("model.zeta_arg") {
            "solve" | "normal" => {}
            _ => {
                let arg = self.f64("model.zeta_arg")?;
                if (2.0 * arg).cos() <= 0.0 {
                    return Err(ConfigError(format!("model.zeta_arg = {arg} gives Re ζ² ≤ 0")));
                }
            }
        }
        let tol = self.positive("solver.tol")?;
        if tol >= 1e-2 {
            return Err(ConfigError(format!("solver.tol must be below 1e-2, got {tol}")));
        }
        let rtol = self.positive("solver.resolution_tol")?;
        if rtol > 1e-2 {
            return Err(ConfigError(format!(
                "solver.resolution_tol must lie in (0, 1e-2], got {rtol}"
            )));
        }
        if self.usize("solver.max_iters")? == 0 {
            return Err(ConfigError("solver.max_iters must be positive".into()));
        }
        self.u64("solver.seed")?;
        self.usize("solver.threads")?;
        if self.usize("experiment.j_max")? > 9 {
            return Err(ConfigError("experiment.j_max is limited to 9".into()));
        }
        let k = self.usize("experiment.k")?;
        if !(1..=10).contains(&k) {
            return Err(ConfigError(format!("experiment.k must lie in 1..=10, got {k}")));
        }
        if self.usize("experiment.n_max")? < 5 {
            return Err(ConfigError("experiment.n_max must be at least 5".into()));
        }
        self.usize("experiment.m")?;
        self.usize("experiment.n")?;
        for key in ["experiment.f", "experiment.g"] {
            transfer_core::Observable::by_name(self.raw(key))?;
        }
        for name in self.list("experiment.observables") {
            transfer_core::Observable::by_name(&name)?;
        }
        Ok(())
    }
}
