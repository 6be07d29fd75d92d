//! Fine-tune every source baseline on every target and write the
//! area-ratio matrix as CSV, markdown and an SVG heatmap.
//!
//! cargo run --release --example sweep -- [out] [seeds] [epochs] [jobs]
//!
//! Defaults to a short budget; pass more epochs for converged baselines.

use catchlab::env::VariantId;
use catchlab::runner::{self, SourceSpec, SweepConfig};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = SweepConfig::new(args.first().map_or("runs/sweep", String::as_str));
    let n: u64 = args.get(1).map_or(Ok(2), |s| s.parse())?;
    cfg.seeds = (0..n).collect();
    cfg.train.num_epochs = args.get(2).map_or(Ok(4), |s| s.parse())?;
    let jobs = args.get(3).map_or(Ok(1), |s| s.parse())?;

    let variants = [VariantId::V0, VariantId::V1, VariantId::V2, VariantId::V3];
    let sources: Vec<SourceSpec> =
        variants.iter().map(|&v| SourceSpec::baseline(v, &cfg.out_dir)).collect();
    let matrix = runner::sweep(&sources, &variants, &cfg, jobs)?;
    print!("{}", matrix.to_markdown());
    for path in runner::report(&matrix, &cfg.out_dir.join("report"))? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
