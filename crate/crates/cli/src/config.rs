//! Effective run configuration: defaults, then `BLOCKFACE_SEED`, then a
//! `key = value` file, then command-line flags.

use std::fs;
use std::path::Path;

use blockface::{Aggregation, ExperimentConfig};

use crate::CliError;

pub const SEED_ENV: &str = "BLOCKFACE_SEED";

/// Every knob of a run; written verbatim into every output document.
pub type RunConfig = ExperimentConfig;

pub const DEFAULT_TOP_N: usize = 5;

pub fn defaults() -> RunConfig {
    RunConfig {
        top_n: DEFAULT_TOP_N,
        ..Default::default()
    }
}

pub const KEYS: &[&str] = &[
    "seed",
    "target-width",
    "target-height",
    "levels",
    "grid-cols",
    "grid-rows",
    "retain",
    "iterations",
    "glcm-levels",
    "distances",
    "ldp-k",
    "th1",
    "mode",
    "threshold",
    "train-per-subject",
    "impostors-per-subject",
    "center-crop",
    "top",
    "reference-accuracy",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("{key}: cannot parse '{value}'")))
}

/// `none`/`off` clear optional knobs.
fn parse_opt<T: std::str::FromStr>(key: &str, value: &str) -> Result<Option<T>, CliError> {
    match value {
        "none" | "off" | "auto" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-").to_ascii_lowercase()
}

pub fn set(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), CliError> {
    let key = normalize(key);
    let value = value.trim();
    let p = &mut cfg.pipeline;
    match key.as_str() {
        "seed" => {
            let seed: u64 = parse(&key, value)?;
            p.blocks.seed = seed;
            cfg.split.seed = seed;
        }
        "target-width" => p.preprocess.target_width = parse(&key, value)?,
        "target-height" => p.preprocess.target_height = parse(&key, value)?,
        "levels" => p.preprocess.poster_levels = parse(&key, value)?,
        "grid-cols" => p.blocks.grid_cols = parse(&key, value)?,
        "grid-rows" => p.blocks.grid_rows = parse(&key, value)?,
        "retain" => p.blocks.retain_count = parse(&key, value)?,
        "iterations" => p.blocks.iterations = parse(&key, value)?,
        "glcm-levels" => p.features.glcm_levels = parse(&key, value)?,
        "distances" => {
            p.features.glcm_distances = value
                .split(',')
                .map(|d| parse(&key, d.trim()))
                .collect::<Result<_, _>>()?
        }
        "ldp-k" => p.features.ldp_k = parse(&key, value)?,
        "th1" => cfg.matching.th1 = parse_opt(&key, value)?,
        "mode" => {
            cfg.matching.mode = value
                .parse::<Aggregation>()
                .map_err(|e| CliError::Usage(e.to_string()))?
        }
        "threshold" => cfg.matching.reject_above = parse_opt(&key, value)?,
        "train-per-subject" => cfg.split.train_per_subject = parse(&key, value)?,
        "impostors-per-subject" => cfg.split.impostors_per_subject = parse(&key, value)?,
        "center-crop" => cfg.center_crop = parse_opt(&key, value)?,
        "top" => cfg.top_n = parse(&key, value)?,
        "reference-accuracy" => cfg.reference_accuracy = parse_opt(&key, value)?,
        other => return Err(CliError::Usage(format!("unknown configuration key '{other}'"))),
    }
    Ok(())
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_file(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
        pairs.push((normalize(k), v.trim().to_string()));
    }
    Ok(pairs)
}

pub fn resolve(
    file: Option<&Path>,
    env_seed: Option<&str>,
    overrides: &[(String, String)],
) -> Result<RunConfig, CliError> {
    let mut cfg = defaults();
    if let Some(seed) = env_seed {
        set(&mut cfg, "seed", seed).map_err(|e| CliError::Usage(format!("{SEED_ENV}: {e}")))?;
    }
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        for (k, v) in parse_file(&text)? {
            set(&mut cfg, &k, &v).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        }
    }
    for (k, v) in overrides {
        set(&mut cfg, k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}
