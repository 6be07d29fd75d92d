//! Multi-seed experiments, sweeps and their on-disk artifacts.
//!
//! A run directory looks like
//!
//! ```text
//! <out_dir>/manifest.txt
//! <out_dir>/aggregate.csv
//! <out_dir>/curve.svg
//! <out_dir>/seed-<s>/curve.csv
//! <out_dir>/seed-<s>/checkpoint.ctlc
//! ```
//!
//! Seed `s` of a run trains with master seed `s`; network init and head
//! re-init draw from the `INIT` and `HEAD` streams of `s` (see
//! [`crate::agent::derived_seed`]), so distinct seeds never share a stream.

pub mod cli;
pub mod config;
pub mod curves;
pub mod suite;
pub mod svg;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};

use crate::agent::{self, derived_seed, streams, LearningCurve};
use crate::env::VariantId;
use crate::metrics::{self, AggregatedCurve, AreaRatio, CurveMetric, TransferSign};
use crate::transfer::{self, Checkpoint, InitSpec};

pub use config::{expand_template, ConfigError, ExperimentConfig, InitDescriptor};

pub const TOOL_VERSION: &str = concat!("catchlab ", env!("CARGO_PKG_VERSION"));
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const PLOT_FILE: &str = "curve.svg";

pub fn seed_dir(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("seed-{seed}"))
}

pub fn curve_path(out_dir: &Path, seed: u64) -> PathBuf {
    seed_dir(out_dir, seed).join("curve.csv")
}

pub fn checkpoint_path(out_dir: &Path, seed: u64) -> PathBuf {
    seed_dir(out_dir, seed).join("checkpoint.ctlc")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pending,
    Running,
    Complete,
    Failed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pending => "pending",
            Status::Running => "running",
            Status::Complete => "complete",
            Status::Failed => "failed",
        }
    }

    fn parse(s: &str) -> Option<Status> {
        Some(match s {
            "pending" => Status::Pending,
            "running" => Status::Running,
            "complete" => Status::Complete,
            "failed" => Status::Failed,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedEntry {
    pub seed: u64,
    pub status: Status,
    pub curve: PathBuf,
    pub checkpoint: PathBuf,
    pub duration_secs: f64,
    pub error: Option<String>,
}

/// Record of one run, rewritten atomically as the run progresses.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub tool_version: String,
    pub status: Status,
    pub started_unix: u64,
    pub duration_secs: f64,
    /// Resolved configuration, as produced by [`ExperimentConfig::to_text`].
    pub config: String,
    pub seeds: Vec<SeedEntry>,
}

impl RunManifest {
    fn new(config: &ExperimentConfig) -> Self {
        RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            status: Status::Running,
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            duration_secs: 0.0,
            config: config.to_text(),
            seeds: config
                .seeds
                .iter()
                .map(|&seed| SeedEntry {
                    seed,
                    status: Status::Pending,
                    curve: curve_path(Path::new(""), seed),
                    checkpoint: checkpoint_path(Path::new(""), seed),
                    duration_secs: 0.0,
                    error: None,
                })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool = {}", self.tool_version);
        let _ = writeln!(s, "status = {}", self.status.as_str());
        let _ = writeln!(s, "started_unix = {}", self.started_unix);
        let _ = writeln!(s, "duration_secs = {}", self.duration_secs);
        for line in self.config.lines() {
            let _ = writeln!(s, "config.{line}");
        }
        for e in &self.seeds {
            let p = format!("seed.{}", e.seed);
            let _ = writeln!(s, "{p}.status = {}", e.status.as_str());
            let _ = writeln!(s, "{p}.curve = {}", e.curve.display());
            let _ = writeln!(s, "{p}.checkpoint = {}", e.checkpoint.display());
            let _ = writeln!(s, "{p}.duration_secs = {}", e.duration_secs);
            if let Some(err) = &e.error {
                let _ = writeln!(s, "{p}.error = {}", err.replace('\n', " "));
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut config = String::new();
        let mut top = BTreeMap::new();
        let mut seeds: BTreeMap<u64, BTreeMap<String, String>> = BTreeMap::new();
        let mut order = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once(" = ")
                .with_context(|| format!("bad manifest line `{line}`"))?;
            if let Some(rest) = k.strip_prefix("config.") {
                let _ = writeln!(config, "{rest} = {v}");
            } else if let Some(rest) = k.strip_prefix("seed.") {
                let (seed, field) = rest.split_once('.').context("bad seed key")?;
                let seed: u64 = seed.parse()?;
                if !seeds.contains_key(&seed) {
                    order.push(seed);
                }
                seeds.entry(seed).or_default().insert(field.into(), v.into());
            } else {
                top.insert(k.to_string(), v.to_string());
            }
        }
        let get = |m: &BTreeMap<String, String>, k: &str| -> Result<String> {
            m.get(k).cloned().with_context(|| format!("manifest lacks `{k}`"))
        };
        let status = |s: String| Status::parse(&s).with_context(|| format!("bad status `{s}`"));
        let mut entries = Vec::new();
        for seed in order {
            let m = &seeds[&seed];
            entries.push(SeedEntry {
                seed,
                status: status(get(m, "status")?)?,
                curve: get(m, "curve")?.into(),
                checkpoint: get(m, "checkpoint")?.into(),
                duration_secs: get(m, "duration_secs")?.parse()?,
                error: m.get("error").cloned(),
            });
        }
        Ok(RunManifest {
            tool_version: get(&top, "tool")?,
            status: status(get(&top, "status")?)?,
            started_unix: get(&top, "started_unix")?.parse()?,
            duration_secs: get(&top, "duration_secs")?.parse()?,
            config,
            seeds: entries,
        })
    }

    pub fn load(out_dir: &Path) -> Result<Self> {
        let path = out_dir.join(MANIFEST_FILE);
        let text =
            std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        RunManifest::parse(&text).with_context(|| path.display().to_string())
    }

    fn write(&self, out_dir: &Path) -> Result<()> {
        transfer::write_atomic(&out_dir.join(MANIFEST_FILE), self.to_text().as_bytes())
            .with_context(|| format!("writing manifest in {}", out_dir.display()))
    }

    pub fn failed_seeds(&self) -> Vec<&SeedEntry> {
        self.seeds
            .iter()
            .filter(|e| e.status != Status::Complete)
            .collect()
    }
}

/// Initial network for seed `seed`, the `index`-th entry of the seed list.
pub fn init_for_seed(init: &InitDescriptor, seed: u64, index: usize) -> Result<InitSpec> {
    let load = |template: &str| -> Result<Checkpoint> {
        let path = expand_template(template, seed, index);
        Checkpoint::load(&path).with_context(|| format!("loading {}", path.display()))
    };
    let head_seed = derived_seed(seed, streams::HEAD);
    Ok(match init {
        InitDescriptor::Scratch => InitSpec::Scratch {
            seed: derived_seed(seed, streams::INIT),
        },
        InitDescriptor::FineTune { source } => InitSpec::FineTune {
            source: load(source)?,
            head_seed,
        },
        InitDescriptor::OnlyHead { source } => InitSpec::OnlyHead {
            source: load(source)?,
            head_seed,
        },
        InitDescriptor::Hybrid { body, head } => InitSpec::Hybrid {
            body: load(body)?,
            head: load(head)?,
        },
    })
}

fn run_seed(config: &ExperimentConfig, seed: u64, index: usize) -> Result<LearningCurve> {
    let init = init_for_seed(&config.init, seed, index)?;
    let mut train = config.train.clone();
    train.seed = seed;
    let variant = config.variant.config();
    let started = Instant::now();
    let outcome = agent::train_with_observer(&variant, &train, &init, |r, c| {
        log::debug!(
            "{} seed {seed} epoch {} catch {:.3} return {:.3} loss {:.5} eps {:.3} grad {} ({:.0}s)",
            config.name,
            r.epoch,
            r.eval_catch_rate,
            r.eval_mean_return,
            r.mean_loss,
            r.epsilon,
            c.grad_steps,
            started.elapsed().as_secs_f64()
        );
    })?;
    let dir = seed_dir(&config.out_dir, seed);
    std::fs::create_dir_all(&dir)?;
    transfer::write_atomic(
        &curve_path(&config.out_dir, seed),
        &curves::seed_curve_csv(seed, &outcome.curve)?,
    )?;
    outcome.checkpoint.save(checkpoint_path(&config.out_dir, seed))?;
    Ok(outcome.curve)
}

/// Trains every seed of `config`, `jobs` seeds at a time, and writes the run
/// directory. Seed failures are recorded in the manifest; the other seeds
/// still run. Errors are returned only for problems found before training
/// (invalid config, missing checkpoints) or for I/O on the run directory.
pub fn run(config: &ExperimentConfig, jobs: usize) -> Result<RunManifest> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;
    let started = Instant::now();
    let manifest = Mutex::new(RunManifest::new(config));
    manifest.lock().unwrap().write(&config.out_dir)?;
    log::info!(
        "{}: {} seed(s) on {} -> {}",
        config.name,
        config.seeds.len(),
        config.variant,
        config.out_dir.display()
    );

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<LearningCurve>>> = Mutex::new(vec![None; config.seeds.len()]);
    let worker = || loop {
        let index = next.fetch_add(1, Ordering::SeqCst);
        let Some(&seed) = config.seeds.get(index) else {
            break;
        };
        manifest.lock().unwrap().seeds[index].status = Status::Running;
        let t = Instant::now();
        let result = run_seed(config, seed, index);
        let mut m = manifest.lock().unwrap();
        let entry = &mut m.seeds[index];
        entry.duration_secs = t.elapsed().as_secs_f64();
        match result {
            Ok(curve) => {
                log::info!(
                    "{} seed {seed}: final catch rate {:.3} ({:.0}s)",
                    config.name,
                    curve.records.last().map_or(f64::NAN, |r| r.eval_catch_rate),
                    entry.duration_secs
                );
                entry.status = Status::Complete;
                results.lock().unwrap()[index] = Some(curve);
            }
            Err(e) => {
                log::error!("{} seed {seed} failed: {e:#}", config.name);
                entry.status = Status::Failed;
                entry.error = Some(format!("{e:#}"));
            }
        }
        let _ = m.write(&config.out_dir);
    };
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, config.seeds.len()) {
            scope.spawn(worker);
        }
    });

    let mut manifest = manifest.into_inner().unwrap();
    let curves: Vec<LearningCurve> = results.into_inner().unwrap().into_iter().flatten().collect();
    manifest.status = if curves.len() == config.seeds.len() {
        write_aggregates(config, &curves)?;
        Status::Complete
    } else {
        Status::Failed
    };
    manifest.duration_secs = started.elapsed().as_secs_f64();
    manifest.write(&config.out_dir)?;
    Ok(manifest)
}

fn write_aggregates(config: &ExperimentConfig, curves: &[LearningCurve]) -> Result<()> {
    let catch = metrics::mean_curve(curves, CurveMetric::CatchRate)?;
    let returns = metrics::mean_curve(curves, CurveMetric::MeanReturn)?;
    transfer::write_atomic(
        &config.out_dir.join(AGGREGATE_FILE),
        &curves::aggregate_csv(&catch, &returns)?,
    )?;
    let (metric, label) = if config.variant == VariantId::V4 {
        (&returns, "mean return")
    } else {
        (&catch, "catch rate")
    };
    let title = format!("{} ({} seeds)", config.name, curves.len());
    let svg = svg::learning_curves(&title, label, &[(config.name.as_str(), metric)]);
    transfer::write_atomic(&config.out_dir.join(PLOT_FILE), svg.as_bytes())?;
    Ok(())
}

/// [`run`], unless `out_dir` already holds a complete run of the identical
/// configuration, in which case that manifest is returned untouched.
pub fn run_or_reuse(config: &ExperimentConfig, jobs: usize) -> Result<RunManifest> {
    if let Ok(m) = RunManifest::load(&config.out_dir) {
        if m.status == Status::Complete
            && m.config == config.to_text()
            && m.tool_version == TOOL_VERSION
        {
            log::info!("{}: reusing {}", config.name, config.out_dir.display());
            return Ok(m);
        }
    }
    run(config, jobs)
}

/// Curves of a finished run, in seed-list order.
#[derive(Clone, Debug)]
pub struct RunData {
    pub seeds: Vec<u64>,
    pub curves: Vec<LearningCurve>,
}

impl RunData {
    pub fn load(out_dir: &Path) -> Result<Self> {
        let manifest = RunManifest::load(out_dir)?;
        if manifest.status != Status::Complete {
            bail!(
                "run in {} is {}",
                out_dir.display(),
                manifest.status.as_str()
            );
        }
        let mut seeds = Vec::new();
        let mut out = Vec::new();
        for e in &manifest.seeds {
            let path = out_dir.join(&e.curve);
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("reading {}", path.display()))?;
            let mut by_seed = curves::read_seed_curves(&text)?;
            let curve = by_seed
                .remove(&e.seed)
                .with_context(|| format!("{} has no rows for seed {}", path.display(), e.seed))?;
            seeds.push(e.seed);
            out.push(curve);
        }
        Ok(RunData { seeds, curves: out })
    }

    pub fn mean(&self, metric: CurveMetric) -> Result<AggregatedCurve> {
        Ok(metrics::mean_curve(&self.curves, metric)?)
    }

    /// Mean over seeds of each seed's last record.
    pub fn final_mean(&self, metric: CurveMetric) -> Result<f64> {
        self.mean(metric)?
            .final_mean()
            .context("empty curve")
    }
}

/// A transfer source: a checkpoint path template and an optional variant
/// used to recognise self-pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceSpec {
    pub label: String,
    pub variant: Option<VariantId>,
    pub checkpoint: String,
}

impl SourceSpec {
    /// The scratch baseline of `variant` inside a sweep directory.
    pub fn baseline(variant: VariantId, sweep_dir: &Path) -> Self {
        SourceSpec {
            label: variant.to_string(),
            variant: Some(variant),
            checkpoint: baseline_dir(sweep_dir, variant)
                .join("seed-{seed}")
                .join("checkpoint.ctlc")
                .to_string_lossy()
                .into_owned(),
        }
    }
}

pub fn baseline_dir(sweep_dir: &Path, variant: VariantId) -> PathBuf {
    sweep_dir.join(format!("baseline-{variant}"))
}

pub fn transfer_dir(sweep_dir: &Path, source: &str, target: VariantId) -> PathBuf {
    sweep_dir.join(format!("{source}-to-{target}"))
}

/// Shared settings of every run in a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub train: agent::TrainConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub include_self: bool,
    pub metric: CurveMetric,
    pub dead_zone: f64,
}

impl SweepConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        SweepConfig {
            train: agent::TrainConfig::default(),
            seeds: config::DEFAULT_SEEDS.to_vec(),
            out_dir: out_dir.into(),
            include_self: false,
            metric: CurveMetric::CatchRate,
            dead_zone: metrics::DEFAULT_DEAD_ZONE,
        }
    }

    fn experiment(&self, name: String, variant: VariantId, init: InitDescriptor, dir: PathBuf) -> ExperimentConfig {
        ExperimentConfig {
            name,
            variant,
            init,
            train: self.train.clone(),
            seeds: self.seeds.clone(),
            out_dir: dir,
        }
    }
}

/// The runs a sweep needs, baselines first.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub baselines: Vec<ExperimentConfig>,
    /// `(source index, target, run)`.
    pub transfers: Vec<(usize, VariantId, ExperimentConfig)>,
}

/// Baselines cover every target plus every source whose checkpoint lives
/// in a baseline directory of this sweep.
pub fn plan_sweep(sources: &[SourceSpec], targets: &[VariantId], cfg: &SweepConfig) -> SweepPlan {
    let mut baseline_variants: Vec<VariantId> = targets.to_vec();
    for s in sources {
        if let Some(v) = s.variant {
            if *s == SourceSpec::baseline(v, &cfg.out_dir) && !baseline_variants.contains(&v) {
                baseline_variants.push(v);
            }
        }
    }
    let baselines = baseline_variants
        .iter()
        .map(|&v| {
            cfg.experiment(
                format!("baseline-{v}"),
                v,
                InitDescriptor::Scratch,
                baseline_dir(&cfg.out_dir, v),
            )
        })
        .collect();
    let mut transfers = Vec::new();
    for (i, s) in sources.iter().enumerate() {
        for &t in targets {
            if s.variant == Some(t) && !cfg.include_self {
                continue;
            }
            let run = cfg.experiment(
                format!("{}-to-{t}", s.label),
                t,
                InitDescriptor::FineTune {
                    source: s.checkpoint.clone(),
                },
                transfer_dir(&cfg.out_dir, &s.label, t),
            );
            transfers.push((i, t, run));
        }
    }
    SweepPlan {
        baselines,
        transfers,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixCell {
    pub ratio: AreaRatio,
    pub sign: TransferSign,
}

/// Area ratios with sources as rows and targets as columns.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix {
    pub sources: Vec<String>,
    pub targets: Vec<VariantId>,
    pub cells: Vec<Vec<Option<MatrixCell>>>,
}

pub const MATRIX_FILE: &str = "matrix.csv";

impl TransferMatrix {
    pub fn empty(sources: Vec<String>, targets: Vec<VariantId>) -> Self {
        let cells = vec![vec![None; targets.len()]; sources.len()];
        TransferMatrix {
            sources,
            targets,
            cells,
        }
    }

    pub fn set(&mut self, row: usize, col: usize, ratio: AreaRatio, dead_zone: f64) {
        self.cells[row][col] = Some(MatrixCell {
            ratio,
            sign: ratio.sign(dead_zone),
        });
    }

    pub fn get(&self, source: &str, target: VariantId) -> Option<&MatrixCell> {
        let i = self.sources.iter().position(|s| s == source)?;
        let j = self.targets.iter().position(|&t| t == target)?;
        self.cells[i][j].as_ref()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["source", "target", "r", "transfer_area", "scratch_area", "sign"])?;
        for (i, s) in self.sources.iter().enumerate() {
            for (j, t) in self.targets.iter().enumerate() {
                if let Some(c) = &self.cells[i][j] {
                    w.write_record([
                        s.clone(),
                        t.to_string(),
                        c.ratio.r.to_string(),
                        c.ratio.transfer_area.to_string(),
                        c.ratio.scratch_area.to_string(),
                        c.sign.to_string(),
                    ])?;
                }
            }
        }
        Ok(w.into_inner().context("flushing csv")?)
    }

    /// Rebuilds a matrix from [`TransferMatrix::to_csv`] output. Signs are
    /// recomputed with `dead_zone`.
    pub fn from_csv(text: &str, dead_zone: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let f = |j: usize| rec.get(j).unwrap_or("").to_string();
            let target: VariantId = f(1).parse()?;
            let ratio = AreaRatio {
                r: f(2).parse()?,
                transfer_area: f(3).parse()?,
                scratch_area: f(4).parse()?,
            };
            rows.push((f(0), target, ratio));
        }
        let mut sources: Vec<String> = Vec::new();
        let mut targets: Vec<VariantId> = Vec::new();
        for (s, t, _) in &rows {
            if !sources.contains(s) {
                sources.push(s.clone());
            }
            if !targets.contains(t) {
                targets.push(*t);
            }
        }
        targets.sort();
        let mut m = TransferMatrix::empty(sources, targets);
        for (s, t, ratio) in rows {
            let i = m.sources.iter().position(|x| *x == s).unwrap();
            let j = m.targets.iter().position(|&x| x == t).unwrap();
            m.set(i, j, ratio, dead_zone);
        }
        Ok(m)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| source \\ target |");
        for t in &self.targets {
            let _ = write!(s, " {t} |");
        }
        s.push_str("\n|---|");
        for _ in &self.targets {
            s.push_str("---|");
        }
        s.push('\n');
        for (i, src) in self.sources.iter().enumerate() {
            let _ = write!(s, "| {src} |");
            for cell in &self.cells[i] {
                match cell {
                    Some(c) => {
                        let _ = write!(s, " {:.3} ({}) |", c.ratio.r, c.sign);
                    }
                    None => s.push_str(" - |"),
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn to_svg(&self, title: &str) -> String {
        let cells: Vec<Vec<Option<f64>>> = self
            .cells
            .iter()
            .map(|row| row.iter().map(|c| c.as_ref().map(|c| c.ratio.r)).collect())
            .collect();
        let cols: Vec<String> = self.targets.iter().map(ToString::to_string).collect();
        svg::heatmap(title, &self.sources, &cols, &cells)
    }
}

/// Runs (or reuses) all baselines and transfer runs, then scores each pair
/// against its target's baseline.
pub fn sweep(
    sources: &[SourceSpec],
    targets: &[VariantId],
    cfg: &SweepConfig,
    jobs: usize,
) -> Result<TransferMatrix> {
    let plan = plan_sweep(sources, targets, cfg);
    std::fs::create_dir_all(&cfg.out_dir)?;
    let mut baseline_curves = BTreeMap::new();
    for b in &plan.baselines {
        let m = run_or_reuse(b, jobs)?;
        if m.status != Status::Complete {
            bail!("baseline {} failed; see {}", b.name, b.out_dir.display());
        }
        baseline_curves.insert(b.variant, RunData::load(&b.out_dir)?.mean(cfg.metric)?);
    }
    let mut matrix = TransferMatrix::empty(
        sources.iter().map(|s| s.label.clone()).collect(),
        targets.to_vec(),
    );
    for (i, target, run_cfg) in &plan.transfers {
        let m = run_or_reuse(run_cfg, jobs)?;
        if m.status != Status::Complete {
            log::error!("{} failed; leaving its cell empty", run_cfg.name);
            continue;
        }
        let curve = RunData::load(&run_cfg.out_dir)?.mean(cfg.metric)?;
        match metrics::area_ratio(&curve, &baseline_curves[target]) {
            Ok(ratio) => {
                let j = targets.iter().position(|t| t == target).unwrap();
                matrix.set(*i, j, ratio, cfg.dead_zone);
            }
            Err(e) => log::error!("{}: {e}; leaving its cell empty", run_cfg.name),
        }
    }
    transfer::write_atomic(&cfg.out_dir.join(MATRIX_FILE), &matrix.to_csv()?)?;
    Ok(matrix)
}

/// Writes `matrix.md`, `matrix.svg` and `matrix.csv` into `out_dir`.
pub fn report(matrix: &TransferMatrix, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let md = out_dir.join("matrix.md");
    let svg_path = out_dir.join("matrix.svg");
    let csv_path = out_dir.join(MATRIX_FILE);
    let mut text = String::from("# Transfer matrix\n\nArea ratio r per source (rows) and target (columns).\n\n");
    text.push_str(&matrix.to_markdown());
    transfer::write_atomic(&md, text.as_bytes())?;
    transfer::write_atomic(&svg_path, matrix.to_svg("area ratio r").as_bytes())?;
    transfer::write_atomic(&csv_path, &matrix.to_csv()?)?;
    Ok(vec![md, svg_path, csv_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_text_round_trips() {
        let cfg = ExperimentConfig::new("x", VariantId::V1, InitDescriptor::Scratch, "/tmp/x");
        let mut m = RunManifest::new(&cfg);
        m.seeds[1].status = Status::Failed;
        m.seeds[1].error = Some("boom\nagain".into());
        m.status = Status::Failed;
        let back = RunManifest::parse(&m.to_text()).unwrap();
        assert_eq!(back.config, cfg.to_text());
        assert_eq!(back.seeds.len(), 5);
        assert_eq!(back.seeds[1].error.as_deref(), Some("boom again"));
        assert_eq!(back.failed_seeds().len(), 5);
    }

    #[test]
    fn sweep_plan_counts() {
        let dir = Path::new("/sweep");
        let cfg = SweepConfig::new(dir);
        let sources: Vec<SourceSpec> = VariantId::ALL[..4]
            .iter()
            .map(|&v| SourceSpec::baseline(v, dir))
            .collect();
        let targets = &VariantId::ALL[..4];
        let plan = plan_sweep(&sources, targets, &cfg);
        assert_eq!(plan.baselines.len(), 4);
        assert_eq!(plan.transfers.len(), 12);
        assert!(plan.transfers.iter().all(|(i, t, _)| sources[*i].variant != Some(*t)));

        let with_self = plan_sweep(&sources, targets, &SweepConfig { include_self: true, ..cfg.clone() });
        assert_eq!(with_self.transfers.len(), 16);

        let empty = plan_sweep(&[], targets, &cfg);
        assert_eq!(empty.baselines.len(), 4);
        assert!(empty.transfers.is_empty());

        // a baseline source outside the target set still gets its baseline
        let plan = plan_sweep(&sources[..1], &[VariantId::V2], &cfg);
        assert_eq!(plan.baselines.len(), 2);
    }

    #[test]
    fn matrix_csv_and_markdown() {
        let mut m = TransferMatrix::empty(vec!["v0".into(), "v1".into()], vec![VariantId::V2, VariantId::V3]);
        m.set(0, 0, AreaRatio::from_areas(172.9, 100.0).unwrap(), 0.05);
        m.set(1, 1, AreaRatio::from_areas(90.0, 100.0).unwrap(), 0.05);
        let back = TransferMatrix::from_csv(std::str::from_utf8(&m.to_csv().unwrap()).unwrap(), 0.05).unwrap();
        assert_eq!(back.get("v0", VariantId::V2), m.get("v0", VariantId::V2));
        assert_eq!(back.get("v1", VariantId::V3).unwrap().sign, TransferSign::Negative);
        let md = m.to_markdown();
        assert!(md.starts_with("| source \\ target | v2 | v3 |"));
        assert!(md.contains("| v0 | 0.729 (positive) | - |"));
        assert!(md.contains("| v1 | - | -0.100 (negative) |"));
    }

    #[test]
    fn all_zero_matrix_is_unshaded() {
        let mut m = TransferMatrix::empty(vec!["a".into()], vec![VariantId::V0, VariantId::V1]);
        m.set(0, 0, AreaRatio::from_areas(1.0, 1.0).unwrap(), 0.05);
        m.set(0, 1, AreaRatio::from_areas(2.0, 2.0).unwrap(), 0.05);
        let svg = m.to_svg("t");
        assert_eq!(svg.matches("fill-opacity=\"0.0000\"").count(), 2);
    }
}
