//! Catch-v4 pays only for five catches in a row. Scratch training on it
//! against fine-tuning a converged v0 network.
//!
//! cargo run --release --example sparse_reward -- [root] [seeds] [jobs]

use catchlab::env::VariantId;
use catchlab::metrics::{area_ratio, CurveMetric, DEFAULT_DEAD_ZONE};
use catchlab::runner::suite::{Study, Suite};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut suite = Suite::new(args.first().map_or("runs/sparse-reward", String::as_str));
    suite.n_seeds = args.get(1).map_or(Ok(5), |s| s.parse())?;
    suite.jobs = args.get(2).map_or(Ok(1), |s| s.parse())?;

    let transfer = Study::Transfer { from: VariantId::V0, to: VariantId::V4 };
    let scratch = suite.ensure(Study::Scratch(VariantId::V4))?.mean(CurveMetric::MeanReturn)?;
    let fine = suite.ensure(transfer)?.mean(CurveMetric::MeanReturn)?;
    println!("epoch  scratch  v0 -> v4   (mean return)");
    for (s, f) in scratch.points.iter().zip(&fine.points) {
        println!("{:5}  {:.3}    {:.3}", s.epoch, s.mean, f.mean);
    }
    let best = scratch.means().into_iter().fold(0.0, f64::max);
    let r = area_ratio(&fine, &scratch)?;
    println!("scratch best {best:.3}; r = {:+.3} ({})", r.r, r.sign(DEFAULT_DEAD_ZONE));
    Ok(())
}
