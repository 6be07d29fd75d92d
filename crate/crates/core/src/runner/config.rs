//! Flat `key = value` experiment files.
//!
//! ```text
//! # comment
//! variant = v0
//! regime = fine-tune
//! source = runs/v0-scratch/seed-{seed}/checkpoint.ctlc
//! seeds = 0,1,2,3,4
//! num_epochs = 30
//! ```
//!
//! Checkpoint paths may contain `{seed}` (the run seed), `{index}` (its
//! position in the seed list) or `{index+N}` (that position offset by `N`)
//! so each seed can pick up its own source.
//! Relative paths are resolved against the config file's directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::agent::TrainConfig;
use crate::env::VariantId;
use crate::transfer::Regime;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: {message}")]
    BadValue { key: String, message: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("seed list must be non-empty and duplicate-free")]
    Seeds,
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Parses `key = value` lines, keeping the last value for repeated keys.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::BadValue {
        key: key.to_string(),
        message: e.to_string(),
    })
}

pub fn parse_seeds(value: &str) -> Result<Vec<u64>, ConfigError> {
    let mut seeds = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = parse_value("seeds", a)?;
            let b: u64 = parse_value("seeds", b)?;
            seeds.extend(a..b);
        } else {
            seeds.push(parse_value("seeds", part)?);
        }
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if seeds.is_empty() || sorted.len() != seeds.len() {
        return Err(ConfigError::Seeds);
    }
    Ok(seeds)
}

/// Applies one `TrainConfig` override. Returns `Ok(false)` for keys that are
/// not training keys.
pub fn apply_train_key(cfg: &mut TrainConfig, key: &str, value: &str) -> Result<bool, ConfigError> {
    match key {
        "gamma" => cfg.gamma = parse_value(key, value)?,
        "eps_start" => cfg.eps_start = parse_value(key, value)?,
        "eps_end" => cfg.eps_end = parse_value(key, value)?,
        "eps_anneal_steps" => cfg.eps_anneal_steps = parse_value(key, value)?,
        "learn_start" => cfg.learn_start = parse_value(key, value)?,
        "batch_size" => cfg.batch_size = parse_value(key, value)?,
        "target_sync_every" => cfg.target_sync_every = parse_value(key, value)?,
        "episodes_per_epoch" => cfg.episodes_per_epoch = parse_value(key, value)?,
        "eval_episodes" => cfg.eval_episodes = parse_value(key, value)?,
        "num_epochs" => cfg.num_epochs = parse_value(key, value)?,
        "replay_capacity" => cfg.replay_capacity = parse_value(key, value)?,
        "lr" => cfg.optimizer.lr = parse_value(key, value)?,
        "rho" => cfg.optimizer.rho = parse_value(key, value)?,
        "opt_eps" => cfg.optimizer.eps = parse_value(key, value)?,
        "grad_clip" => {
            cfg.grad_clip = match value {
                "none" | "off" | "" => None,
                v => Some(parse_value(key, v)?),
            }
        }
        _ => return Ok(false),
    }
    Ok(true)
}

/// Writes every `TrainConfig` field as `key = value` lines.
pub fn train_config_lines(cfg: &TrainConfig) -> String {
    let mut s = String::new();
    let clip = cfg
        .grad_clip
        .map_or_else(|| "none".to_string(), |c| c.to_string());
    let pairs: [(&str, String); 15] = [
        ("gamma", cfg.gamma.to_string()),
        ("eps_start", cfg.eps_start.to_string()),
        ("eps_end", cfg.eps_end.to_string()),
        ("eps_anneal_steps", cfg.eps_anneal_steps.to_string()),
        ("learn_start", cfg.learn_start.to_string()),
        ("batch_size", cfg.batch_size.to_string()),
        ("target_sync_every", cfg.target_sync_every.to_string()),
        ("episodes_per_epoch", cfg.episodes_per_epoch.to_string()),
        ("eval_episodes", cfg.eval_episodes.to_string()),
        ("num_epochs", cfg.num_epochs.to_string()),
        ("replay_capacity", cfg.replay_capacity.to_string()),
        ("lr", cfg.optimizer.lr.to_string()),
        ("rho", cfg.optimizer.rho.to_string()),
        ("opt_eps", cfg.optimizer.eps.to_string()),
        ("grad_clip", clip),
    ];
    for (k, v) in pairs {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

/// Where a run's initial network comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitDescriptor {
    Scratch,
    FineTune { source: String },
    OnlyHead { source: String },
    Hybrid { body: String, head: String },
}

impl InitDescriptor {
    pub fn regime(&self) -> Regime {
        match self {
            InitDescriptor::Scratch => Regime::Scratch,
            InitDescriptor::FineTune { .. } => Regime::FineTune,
            InitDescriptor::OnlyHead { .. } => Regime::OnlyHead,
            InitDescriptor::Hybrid { .. } => Regime::Hybrid,
        }
    }

    /// Checkpoint path templates this descriptor refers to.
    pub fn templates(&self) -> Vec<&str> {
        match self {
            InitDescriptor::Scratch => vec![],
            InitDescriptor::FineTune { source } | InitDescriptor::OnlyHead { source } => {
                vec![source]
            }
            InitDescriptor::Hybrid { body, head } => vec![body, head],
        }
    }
}

/// Expands `{seed}`, `{index}` and `{index+N}` in a checkpoint path template.
pub fn expand_template(template: &str, seed: u64, index: usize) -> PathBuf {
    let mut out = String::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        rest = &rest[start..];
        let tail = rest;
        let Some(end) = tail.find('}') else {
            break;
        };
        let value = match &tail[1..end] {
            "seed" => Some(seed.to_string()),
            "index" => Some(index.to_string()),
            t => t
                .strip_prefix("index+")
                .and_then(|n| n.parse::<u64>().ok())
                .map(|n| (index as u64 + n).to_string()),
        };
        out.push_str(value.as_deref().unwrap_or(&tail[..=end]));
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    PathBuf::from(out)
}

/// One experiment: a target variant, an initialisation, a training
/// configuration and the seeds to run it under.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub variant: VariantId,
    pub init: InitDescriptor,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

impl ExperimentConfig {
    pub fn new(name: &str, variant: VariantId, init: InitDescriptor, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            name: name.to_string(),
            variant,
            init,
            train: TrainConfig::default(),
            seeds: DEFAULT_SEEDS.to_vec(),
            out_dir: out_dir.into(),
        }
    }

    /// Builds a config from parsed pairs; relative paths are resolved against `base`.
    pub fn from_pairs(pairs: &BTreeMap<String, String>, base: &Path) -> Result<Self, ConfigError> {
        let mut train = TrainConfig::default();
        let mut variant = None;
        let mut regime = Regime::Scratch;
        let mut source = None;
        let mut body = None;
        let mut head = None;
        let mut seeds = DEFAULT_SEEDS.to_vec();
        let mut out_dir = None;
        let mut name = None;
        let resolve = |v: &str| -> String {
            let p = Path::new(v);
            if p.is_absolute() {
                v.to_string()
            } else {
                base.join(p).to_string_lossy().into_owned()
            }
        };
        for (k, v) in pairs {
            if apply_train_key(&mut train, k, v)? {
                continue;
            }
            match k.as_str() {
                "variant" => variant = Some(parse_value::<VariantId>(k, v)?),
                "regime" => {
                    regime = v.parse().map_err(|message| ConfigError::BadValue {
                        key: k.clone(),
                        message,
                    })?
                }
                "source" => source = Some(resolve(v)),
                "body" => body = Some(resolve(v)),
                "head" => head = Some(resolve(v)),
                "seeds" => seeds = parse_seeds(v)?,
                "out_dir" => out_dir = Some(PathBuf::from(resolve(v))),
                "name" => name = Some(v.clone()),
                // `seed` is per run; accept a single seed as a one-element list
                "seed" => seeds = vec![parse_value(k, v)?],
                _ => return Err(ConfigError::UnknownKey(k.clone())),
            }
        }
        let variant = variant.ok_or(ConfigError::Missing("variant"))?;
        let init = match regime {
            Regime::Scratch => InitDescriptor::Scratch,
            Regime::FineTune => InitDescriptor::FineTune {
                source: source.ok_or(ConfigError::Missing("source"))?,
            },
            Regime::OnlyHead => InitDescriptor::OnlyHead {
                source: source.ok_or(ConfigError::Missing("source"))?,
            },
            Regime::Hybrid => InitDescriptor::Hybrid {
                body: body.ok_or(ConfigError::Missing("body"))?,
                head: head.ok_or(ConfigError::Missing("head"))?,
            },
        };
        let name = name.unwrap_or_else(|| format!("{}-{}", variant, regime.as_str()));
        let out_dir = out_dir.unwrap_or_else(|| base.join("runs").join(&name));
        let cfg = ExperimentConfig {
            name,
            variant,
            init,
            train,
            seeds,
            out_dir,
        };
        cfg.validate_values()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::from_pairs(&parse_pairs(&text)?, base)
    }

    fn validate_values(&self) -> Result<(), ConfigError> {
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if self.seeds.is_empty() || sorted.len() != self.seeds.len() {
            return Err(ConfigError::Seeds);
        }
        self.train
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Value checks plus existence of every referenced checkpoint.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_values()?;
        for template in self.init.templates() {
            for (index, &seed) in self.seeds.iter().enumerate() {
                let path = expand_template(template, seed, index);
                if !path.is_file() {
                    return Err(ConfigError::Invalid(format!(
                        "checkpoint {} (seed {seed}) does not exist",
                        path.display()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Serialises the fully resolved configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "variant = {}", self.variant);
        let _ = writeln!(s, "regime = {}", self.init.regime().as_str());
        match &self.init {
            InitDescriptor::Scratch => {}
            InitDescriptor::FineTune { source } | InitDescriptor::OnlyHead { source } => {
                let _ = writeln!(s, "source = {source}");
            }
            InitDescriptor::Hybrid { body, head } => {
                let _ = writeln!(s, "body = {body}");
                let _ = writeln!(s, "head = {head}");
            }
        }
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "seeds = {}", seeds.join(","));
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        s.push_str(&train_config_lines(&self.train));
        s
    }
}
