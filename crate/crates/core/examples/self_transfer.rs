//! Self-transfer on one variant: scratch baseline, then only-head and
//! fine-tune runs started from the baseline's own checkpoints.
//!
//! cargo run --release --example self_transfer -- [variant] [root] [seeds] [jobs]
//!
//! Finished runs under `root` are reused, so an interrupted study resumes.

use catchlab::env::VariantId;
use catchlab::metrics::{area_ratio, CurveMetric, DEFAULT_DEAD_ZONE};
use catchlab::runner::suite::{Study, Suite};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let variant: VariantId = args.first().map_or(Ok(VariantId::V0), |s| s.parse())?;
    let mut suite = Suite::new(args.get(1).map_or("runs/self-transfer", String::as_str));
    suite.n_seeds = args.get(2).map_or(Ok(5), |s| s.parse())?;
    suite.jobs = args.get(3).map_or(Ok(1), |s| s.parse())?;

    let scratch = suite.ensure(Study::Scratch(variant))?.mean(CurveMetric::CatchRate)?;
    println!("{:10} final catch {:.3}", "scratch", scratch.final_mean().unwrap_or(f64::NAN));
    for study in [Study::OnlyHead(variant), Study::FineTune(variant)] {
        let curve = suite.ensure(study)?.mean(CurveMetric::CatchRate)?;
        let r = area_ratio(&curve, &scratch)?;
        println!(
            "{:10} final catch {:.3}  r = {:+.3} ({})",
            study.to_string().trim_end_matches(&format!("-{variant}")),
            curve.final_mean().unwrap_or(f64::NAN),
            r.r,
            r.sign(DEFAULT_DEAD_ZONE)
        );
    }
    println!("runs in {}", suite.root.display());
    Ok(())
}
