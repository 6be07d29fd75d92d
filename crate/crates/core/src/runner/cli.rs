//! `catchlab` command line.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
//! Failures print one `error: ...` line on stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use super::config::{self, parse_pairs, parse_seeds, ConfigError, ExperimentConfig};
use super::{curves, report, run, sweep, SourceSpec, Status, SweepConfig, TransferMatrix};
use crate::agent;
use crate::env::{self, Catch, VariantId};
use crate::metrics::{self, CurveMetric};
use crate::transfer::Checkpoint;

#[derive(Parser, Debug)]
#[command(name = "catchlab", version, about = "DQN transfer experiments on Catch")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train from a config file (any regime; scratch by default).
    Train(TrainArgs),
    /// Fine-tune or train only the head on top of a source checkpoint.
    Transfer {
        #[arg(long, value_enum)]
        mode: TransferMode,
        /// Checkpoint path; may contain {seed}, {index} or {index+N}.
        #[arg(long)]
        source: String,
        #[command(flatten)]
        common: TrainArgs,
    },
    /// Train from a body checkpoint combined with a head checkpoint.
    Hybrid {
        #[arg(long)]
        body: String,
        #[arg(long)]
        head: String,
        #[command(flatten)]
        common: TrainArgs,
    },
    /// Greedy evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        variant: VariantId,
        #[arg(long, default_value_t = 200)]
        episodes: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Area ratio between two curve CSVs (per-seed or aggregate).
    AreaRatio {
        #[arg(long)]
        transfer_csv: PathBuf,
        #[arg(long)]
        scratch_csv: PathBuf,
        #[arg(long, value_enum, default_value_t = MetricArg::CatchRate)]
        metric: MetricArg,
        #[arg(long, default_value_t = metrics::DEFAULT_DEAD_ZONE)]
        dead_zone: f64,
    },
    /// Fine-tune every source on every target and score against baselines.
    Sweep(SweepArgs),
    /// Markdown table and SVG heatmap from a matrix CSV.
    Report {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = metrics::DEFAULT_DEAD_ZONE)]
        dead_zone: f64,
    },
    /// Exhaustive physics and oracle-policy checks.
    Oracle {
        /// Check one variant instead of all five.
        #[arg(long)]
        variant: Option<VariantId>,
        /// Write the frames of one oracle episode per variant as PGM files.
        #[arg(long)]
        dump_frames: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TransferMode {
    FineTune,
    OnlyHead,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MetricArg {
    CatchRate,
    Return,
}

impl From<MetricArg> for CurveMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::CatchRate => CurveMetric::CatchRate,
            MetricArg::Return => CurveMetric::MeanReturn,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Experiment file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<VariantId>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma list or range, e.g. `0,1,2` or `0..5`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    epochs: Option<u32>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Seeds trained concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// File with training keys plus `seeds`, `out_dir`, `include_self`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Variants whose scratch baselines serve as sources.
    #[arg(long, value_delimiter = ',')]
    sources: Vec<VariantId>,
    /// Extra sources as `label=checkpoint-template`.
    #[arg(long = "source", value_name = "LABEL=PATH")]
    source: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "v0,v1,v2,v3")]
    targets: Vec<VariantId>,
    #[arg(long)]
    include_self: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    epochs: Option<u32>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

/// Error category deciding the exit code.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    anyhow::Error::new(Usage(e.to_string()))
}

fn absolute(p: &Path) -> String {
    std::path::absolute(p)
        .unwrap_or_else(|_| p.to_path_buf())
        .to_string_lossy()
        .into_owned()
}

fn split_kv(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| usage(format!("expected KEY=VALUE, got `{s}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn read_pairs(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    parse_pairs(&text).map_err(usage)
}

/// Config file pairs, then flags, then `--set` overrides. Paths given on the
/// command line are made absolute so they resolve against the working
/// directory rather than the config file's.
fn experiment(args: &TrainArgs, extra: &[(&str, String)]) -> Result<ExperimentConfig> {
    let (mut pairs, base) = match &args.config {
        Some(p) => (
            read_pairs(p)?,
            p.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf),
        ),
        None => (BTreeMap::new(), PathBuf::from(".")),
    };
    for (k, v) in extra {
        pairs.insert((*k).to_string(), v.clone());
    }
    if let Some(v) = args.variant {
        pairs.insert("variant".into(), v.to_string());
    }
    if let Some(o) = &args.out {
        pairs.insert("out_dir".into(), absolute(o));
    }
    if let Some(s) = &args.seeds {
        pairs.insert("seeds".into(), s.clone());
    }
    if let Some(e) = args.epochs {
        pairs.insert("num_epochs".into(), e.to_string());
    }
    for s in &args.set {
        let (k, v) = split_kv(s)?;
        pairs.insert(k, v);
    }
    ExperimentConfig::from_pairs(&pairs, &base).map_err(usage)
}

fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<()> {
    cfg.validate().map_err(usage)?;
    let manifest = run(cfg, jobs)?;
    for e in &manifest.seeds {
        println!(
            "seed {}: {}{}",
            e.seed,
            e.status.as_str(),
            e.error.as_ref().map(|m| format!(" ({m})")).unwrap_or_default()
        );
    }
    if manifest.status != Status::Complete {
        bail!(
            "{} of {} seeds failed; see {}",
            manifest.failed_seeds().len(),
            manifest.seeds.len(),
            cfg.out_dir.join(super::MANIFEST_FILE).display()
        );
    }
    let data = super::RunData::load(&cfg.out_dir)?;
    println!(
        "final catch_rate = {:.3}, mean_return = {:.3} ({} seeds) -> {}",
        data.final_mean(CurveMetric::CatchRate)?,
        data.final_mean(CurveMetric::MeanReturn)?,
        data.seeds.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn sweep_config(args: &SweepArgs) -> Result<SweepConfig> {
    let mut pairs = match &args.config {
        Some(p) => read_pairs(p)?,
        None => BTreeMap::new(),
    };
    if let Some(s) = &args.seeds {
        pairs.insert("seeds".into(), s.clone());
    }
    if let Some(e) = args.epochs {
        pairs.insert("num_epochs".into(), e.to_string());
    }
    for s in &args.set {
        let (k, v) = split_kv(s)?;
        pairs.insert(k, v);
    }
    let mut cfg = SweepConfig::new(args.out.clone().unwrap_or_else(|| PathBuf::from("runs/sweep")));
    cfg.include_self = args.include_self;
    for (k, v) in &pairs {
        if config::apply_train_key(&mut cfg.train, k, v).map_err(usage)? {
            continue;
        }
        match k.as_str() {
            "seeds" => cfg.seeds = parse_seeds(v).map_err(usage)?,
            "out_dir" if args.out.is_none() => cfg.out_dir = PathBuf::from(v),
            "out_dir" => {}
            "include_self" => {
                cfg.include_self |= v
                    .parse::<bool>()
                    .map_err(|e| usage(ConfigError::BadValue { key: k.clone(), message: e.to_string() }))?
            }
            _ => return Err(usage(ConfigError::UnknownKey(k.clone()))),
        }
    }
    cfg.train
        .validate()
        .map_err(|e| usage(ConfigError::Invalid(e.to_string())))?;
    Ok(cfg)
}

fn oracle(variant: Option<VariantId>, dump: Option<&Path>, seed: u64) -> Result<()> {
    let mut ok = true;
    let landing = env::landing_exhaustive();
    println!("landing: {}/{} cases agree with step simulation", landing.caught, landing.cases);
    ok &= landing.caught == landing.cases;
    let variants: Vec<VariantId> = variant.map_or_else(|| VariantId::ALL.to_vec(), |v| vec![v]);
    for &v in &variants {
        let report = env::oracle_exhaustive(&v.config());
        println!("{v}: {}/{} spawn cases caught", report.caught, report.cases);
        ok &= report.caught == report.cases;
        let eval = agent::evaluate_oracle(&v.config(), 200, seed);
        println!("{v}: oracle catch rate {:.3} over 200 episodes", eval.catch_rate);
        ok &= eval.catch_rate == 1.0;
        if v.config().streak_target > 1 {
            match env::oracle_sparse_reward_catch(v, seed) {
                Some(n) => println!("{v}: first reward at catch {n}"),
                None => println!("{v}: no reward in an oracle episode"),
            }
            ok &= env::oracle_sparse_reward_catch(v, seed) == Some(v.config().streak_target);
        }
        if let Some(dir) = dump {
            let n = dump_frames(v, seed, &dir.join(v.as_str()))?;
            println!("{v}: wrote {n} frames to {}", dir.join(v.as_str()).display());
        }
    }
    if !ok {
        bail!("oracle checks failed");
    }
    Ok(())
}

fn dump_frames(variant: VariantId, seed: u64, dir: &Path) -> Result<usize> {
    std::fs::create_dir_all(dir)?;
    let cfg = variant.config();
    let mut game = Catch::new(cfg, seed);
    let mut n = 0;
    let write = |game: &Catch, n: &mut usize| -> Result<()> {
        let path = dir.join(format!("frame-{:04}.pgm", *n));
        std::fs::write(&path, game.observation().newest().to_pgm())
            .with_context(|| format!("writing {}", path.display()))?;
        *n += 1;
        Ok(())
    };
    write(&game, &mut n)?;
    while !game.is_terminal() {
        let a = env::oracle_policy(game.state(), &cfg);
        game.step(a);
        write(&game, &mut n)?;
    }
    Ok(n)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = experiment(&args, &[])?;
            run_experiment(&cfg, args.jobs)
        }
        Command::Transfer {
            mode,
            source,
            common,
        } => {
            let regime = match mode {
                TransferMode::FineTune => "fine-tune",
                TransferMode::OnlyHead => "only-head",
            };
            let cfg = experiment(
                &common,
                &[("regime", regime.into()), ("source", absolute(Path::new(&source)))],
            )?;
            run_experiment(&cfg, common.jobs)
        }
        Command::Hybrid { body, head, common } => {
            let cfg = experiment(
                &common,
                &[
                    ("regime", "hybrid".into()),
                    ("body", absolute(Path::new(&body))),
                    ("head", absolute(Path::new(&head))),
                ],
            )?;
            run_experiment(&cfg, common.jobs)
        }
        Command::Eval {
            ckpt,
            variant,
            episodes,
            seed,
        } => {
            if episodes == 0 {
                return Err(usage("--episodes must be at least 1"));
            }
            let params = Checkpoint::load(&ckpt)
                .with_context(|| format!("loading {}", ckpt.display()))?
                .params()?;
            let r = agent::evaluate(&params, &variant.config(), episodes, seed);
            println!("catch_rate = {:.3}", r.catch_rate);
            println!("mean_return = {:.3}", r.mean_return);
            println!("balls = {}, caught = {}", r.balls, r.caught);
            Ok(())
        }
        Command::AreaRatio {
            transfer_csv,
            scratch_csv,
            metric,
            dead_zone,
        } => {
            let t = curves::read_aggregate(&transfer_csv, metric.into())?;
            let s = curves::read_aggregate(&scratch_csv, metric.into())?;
            let ratio = metrics::area_ratio(&t, &s)?;
            println!("r = {:.3}", ratio.r);
            println!("transfer_area = {}", ratio.transfer_area);
            println!("scratch_area = {}", ratio.scratch_area);
            println!("sign = {}", ratio.sign(dead_zone));
            Ok(())
        }
        Command::Sweep(args) => {
            let cfg = sweep_config(&args)?;
            let mut sources: Vec<SourceSpec> = args
                .sources
                .iter()
                .map(|&v| SourceSpec::baseline(v, &cfg.out_dir))
                .collect();
            for s in &args.source {
                let (label, path) = split_kv(s)?;
                sources.push(SourceSpec {
                    label,
                    variant: None,
                    checkpoint: absolute(Path::new(&path)),
                });
            }
            let matrix = sweep(&sources, &args.targets, &cfg, args.jobs)?;
            let files = report(&matrix, &cfg.out_dir)?;
            print!("{}", matrix.to_markdown());
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Report {
            matrix,
            out,
            dead_zone,
        } => {
            let text = std::fs::read_to_string(&matrix)
                .with_context(|| format!("reading {}", matrix.display()))?;
            let m = TransferMatrix::from_csv(&text, dead_zone)?;
            for f in report(&m, &out)? {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Oracle {
            variant,
            dump_frames,
            seed,
        } => oracle(variant, dump_frames.as_deref(), seed),
    }
}

/// Runs the command line and returns the process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            if e.downcast_ref::<Usage>().is_some() {
                eprintln!("usage: catchlab <COMMAND> --help");
                2
            } else {
                1
            }
        }
    }
}
