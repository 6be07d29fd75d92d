//! The standard study set under one root directory: scratch baselines,
//! self-transfer (only-head and fine-tune), the hybrid of the two, and
//! cross-variant fine-tuning such as v0 -> v4.
//!
//! Seeds: baselines and fine-tune runs use `0..n`, only-head runs
//! `100..100+n`, hybrids `200..200+n`, so the two hybrid precursors never
//! share a training seed. Every run on a target variant uses that
//! variant's training config, which keeps transfer and scratch curves on
//! the same epoch grid.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use anyhow::{bail, Result};

use super::{run, run_or_reuse, ExperimentConfig, InitDescriptor, RunData, RunManifest, Status};
use crate::agent::TrainConfig;
use crate::env::VariantId;

pub const ONLY_HEAD_SEED_BASE: u64 = 100;
pub const HYBRID_SEED_BASE: u64 = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Study {
    Scratch(VariantId),
    OnlyHead(VariantId),
    FineTune(VariantId),
    Hybrid(VariantId),
    /// Fine-tune the `from` baseline on `to`.
    Transfer { from: VariantId, to: VariantId },
}

impl Study {
    pub fn target(self) -> VariantId {
        match self {
            Study::Scratch(v) | Study::OnlyHead(v) | Study::FineTune(v) | Study::Hybrid(v) => v,
            Study::Transfer { to, .. } => to,
        }
    }

    /// Runs whose checkpoints this one starts from.
    pub fn prerequisites(self) -> Vec<Study> {
        match self {
            Study::Scratch(_) => vec![],
            Study::OnlyHead(v) | Study::FineTune(v) => vec![Study::Scratch(v)],
            Study::Hybrid(v) => vec![Study::FineTune(v), Study::OnlyHead(v)],
            Study::Transfer { from, .. } => vec![Study::Scratch(from)],
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Study::Scratch(v) => write!(f, "scratch-{v}"),
            Study::OnlyHead(v) => write!(f, "only-head-{v}"),
            Study::FineTune(v) => write!(f, "fine-tune-{v}"),
            Study::Hybrid(v) => write!(f, "hybrid-{v}"),
            Study::Transfer { from, to } => write!(f, "{from}-to-{to}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Suite {
    pub root: PathBuf,
    pub n_seeds: u64,
    pub train: TrainConfig,
    /// Per-target replacements for `train`.
    pub overrides: BTreeMap<VariantId, TrainConfig>,
    pub jobs: usize,
}

impl Suite {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Suite {
            root: root.into(),
            n_seeds: 5,
            train: TrainConfig::default(),
            overrides: BTreeMap::new(),
            jobs: 1,
        }
    }

    /// Default training everywhere, except that v4 epochs hold 50 episodes:
    /// a v4 episode lasts up to five drops, so a good policy would otherwise
    /// spend five times the v0 budget per epoch.
    pub fn standard(root: impl Into<PathBuf>) -> Self {
        let mut suite = Suite::new(root);
        let v4 = TrainConfig {
            episodes_per_epoch: 50,
            ..suite.train.clone()
        };
        suite.overrides.insert(VariantId::V4, v4);
        suite
    }

    pub fn train_for(&self, v: VariantId) -> &TrainConfig {
        self.overrides.get(&v).unwrap_or(&self.train)
    }

    pub fn dir(&self, study: Study) -> PathBuf {
        self.root.join(study.to_string())
    }

    fn checkpoints(&self, study: Study, tag: &str) -> String {
        self.dir(study)
            .join(format!("seed-{tag}"))
            .join("checkpoint.ctlc")
            .to_string_lossy()
            .into_owned()
    }

    pub fn config(&self, study: Study) -> ExperimentConfig {
        let seeds = |base: u64| (base..base + self.n_seeds).collect::<Vec<_>>();
        let (init, seeds) = match study {
            Study::Scratch(_) => (InitDescriptor::Scratch, seeds(0)),
            Study::FineTune(v) => (
                InitDescriptor::FineTune {
                    source: self.checkpoints(Study::Scratch(v), "{seed}"),
                },
                seeds(0),
            ),
            Study::OnlyHead(v) => (
                InitDescriptor::OnlyHead {
                    source: self.checkpoints(Study::Scratch(v), "{index}"),
                },
                seeds(ONLY_HEAD_SEED_BASE),
            ),
            Study::Hybrid(v) => (
                InitDescriptor::Hybrid {
                    body: self.checkpoints(Study::FineTune(v), "{index}"),
                    head: self.checkpoints(
                        Study::OnlyHead(v),
                        &format!("{{index+{ONLY_HEAD_SEED_BASE}}}"),
                    ),
                },
                seeds(HYBRID_SEED_BASE),
            ),
            Study::Transfer { from, .. } => (
                InitDescriptor::FineTune {
                    source: self.checkpoints(Study::Scratch(from), "{seed}"),
                },
                seeds(0),
            ),
        };
        let mut cfg = ExperimentConfig::new(&study.to_string(), study.target(), init, self.dir(study));
        cfg.train = self.train_for(study.target()).clone();
        cfg.seeds = seeds;
        cfg
    }

    /// Runs `study` and everything it depends on, reusing complete runs of
    /// identical configuration whose prerequisites were reused too.
    pub fn ensure(&self, study: Study) -> Result<RunData> {
        self.ensure_inner(study).map(|(data, _)| data)
    }

    fn ensure_inner(&self, study: Study) -> Result<(RunData, bool)> {
        let mut stale = false;
        for pre in study.prerequisites() {
            stale |= self.ensure_inner(pre)?.1;
        }
        let config = self.config(study);
        let before = RunManifest::load(&config.out_dir).ok();
        let m = if stale { run(&config, self.jobs)? } else { run_or_reuse(&config, self.jobs)? };
        if m.status != Status::Complete {
            let failed: Vec<String> = m
                .failed_seeds()
                .iter()
                .map(|e| format!("seed {}: {}", e.seed, e.error.as_deref().unwrap_or("?")))
                .collect();
            bail!("{study} did not complete ({})", failed.join("; "));
        }
        let fresh = before.as_ref() != Some(&m);
        Ok((RunData::load(&self.dir(study))?, fresh))
    }

    /// Loads a finished run without training.
    pub fn load(&self, study: Study) -> Result<RunData> {
        RunData::load(&self.dir(study))
    }
}
