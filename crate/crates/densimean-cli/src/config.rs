//! Settings resolution: command-line flags override the `DENSIMEAN_CACHE`
//! environment variable (cache path only), which overrides the config file,
//! which overrides the built-in defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use densimean::Limits;
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// The config-file schema. Every key is optional; unknown keys are rejected
/// so a typo cannot silently fall back to a default.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub factor_budget: Option<u64>,
    pub divisor_cap: Option<u64>,
    pub enum_cap: Option<u64>,
    pub cache_path: Option<PathBuf>,
    pub output_format: Option<Format>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("bad config {}: {e}", path.display())))?;
        for (name, value) in [
            ("factor_budget", cfg.factor_budget),
            ("divisor_cap", cfg.divisor_cap),
            ("enum_cap", cfg.enum_cap),
        ] {
            if value == Some(0) {
                return Err(CliError::usage(format!("config key {name} must be positive")));
            }
        }
        Ok(cfg)
    }
}

/// Flag values as parsed, before merging.
#[derive(Debug, Default)]
pub struct Overrides {
    pub factor_budget: Option<u64>,
    pub divisor_cap: Option<u64>,
    pub enum_cap: Option<u64>,
    pub cache_path: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
}

/// Fully resolved settings for one run.
#[derive(Debug)]
pub struct Settings {
    pub limits: Limits,
    pub cache_path: PathBuf,
    pub format: Format,
}

pub const DEFAULT_CACHE_FILE: &str = "densimean-cache.jsonl";

pub fn resolve(flags: Overrides, config: RunConfig) -> Result<Settings, CliError> {
    for (name, value) in [
        ("--factor-budget", flags.factor_budget),
        ("--divisor-cap", flags.divisor_cap),
        ("--enum-cap", flags.enum_cap),
    ] {
        if value == Some(0) {
            return Err(CliError::usage(format!("{name} must be positive")));
        }
    }
    let defaults = Limits::default();
    let limits = Limits {
        factor_budget: flags
            .factor_budget
            .or(config.factor_budget)
            .unwrap_or(defaults.factor_budget),
        divisor_cap: flags
            .divisor_cap
            .or(config.divisor_cap)
            .unwrap_or(defaults.divisor_cap),
        enum_cap: flags.enum_cap.or(config.enum_cap).unwrap_or(defaults.enum_cap),
        scan_cap: defaults.scan_cap,
        seed: flags.seed.or(config.seed).unwrap_or(defaults.seed),
    };
    let cache_path = flags
        .cache_path
        .or_else(|| std::env::var_os("DENSIMEAN_CACHE").map(PathBuf::from))
        .or(config.cache_path)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_FILE));
    let format = flags.format.or(config.output_format).unwrap_or(Format::Csv);
    Ok(Settings {
        limits,
        cache_path,
        format,
    })
}

impl Settings {
    /// Every resolved knob, stringified; embedded in each report so a run
    /// can be reproduced from its own output.
    pub fn params(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        map.insert("factor_budget".into(), self.limits.factor_budget.to_string());
        map.insert("divisor_cap".into(), self.limits.divisor_cap.to_string());
        map.insert("enum_cap".into(), self.limits.enum_cap.to_string());
        map.insert("seed".into(), self.limits.seed.to_string());
        map.insert(
            "cache_path".into(),
            self.cache_path.display().to_string(),
        );
        map.insert(
            "format".into(),
            match self.format {
                Format::Csv => "csv".into(),
                Format::Json => "json".into(),
            },
        );
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags_with_cache() -> Overrides {
        // pin the cache path so the DENSIMEAN_CACHE variable, if set in the
        // test environment, cannot influence these cases
        Overrides {
            cache_path: Some(PathBuf::from("pinned.jsonl")),
            ..Overrides::default()
        }
    }

    #[test]
    fn defaults_flow_through() {
        let s = resolve(flags_with_cache(), RunConfig::default()).unwrap();
        let d = Limits::default();
        assert_eq!(s.limits.factor_budget, d.factor_budget);
        assert_eq!(s.limits.divisor_cap, d.divisor_cap);
        assert_eq!(s.limits.enum_cap, d.enum_cap);
        assert_eq!(s.format, Format::Csv);
        assert_eq!(s.cache_path, PathBuf::from("pinned.jsonl"));
    }

    #[test]
    fn config_fills_gaps_and_flags_trump_it() {
        let config = RunConfig {
            factor_budget: Some(500),
            enum_cap: Some(1024),
            output_format: Some(Format::Json),
            seed: Some(7),
            ..RunConfig::default()
        };
        let mut flags = flags_with_cache();
        flags.factor_budget = Some(777);
        let s = resolve(flags, config).unwrap();
        assert_eq!(s.limits.factor_budget, 777);
        assert_eq!(s.limits.enum_cap, 1024);
        assert_eq!(s.limits.seed, 7);
        assert_eq!(s.format, Format::Json);
    }

    #[test]
    fn zero_caps_are_rejected_up_front() {
        let mut flags = flags_with_cache();
        flags.divisor_cap = Some(0);
        let err = resolve(flags, RunConfig::default()).unwrap_err();
        assert_eq!(err.code, 2);
    }

    #[test]
    fn config_file_parses_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "factor_budget = 9\noutput_format = \"json\"\n").unwrap();
        let c = RunConfig::load(&path).unwrap();
        assert_eq!(c.factor_budget, Some(9));
        assert_eq!(c.output_format, Some(Format::Json));

        std::fs::write(&path, "factor_budget = 0\n").unwrap();
        assert_eq!(RunConfig::load(&path).unwrap_err().code, 2);
        std::fs::write(&path, "mystery = true\n").unwrap();
        assert_eq!(RunConfig::load(&path).unwrap_err().code, 2);
        assert_eq!(RunConfig::load(&dir.path().join("absent.toml")).unwrap_err().code, 2);
    }
}
