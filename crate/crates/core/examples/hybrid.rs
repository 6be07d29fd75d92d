//! Hybrid self-transfer: the body of a fine-tuned network joined to the
//! head of an only-head network, then trained in full.
//!
//! cargo run --release --example hybrid -- [variant] [root] [seeds] [jobs]
//!
//! Shares its directory layout with the self_transfer example, so pointing
//! both at the same root trains the precursors once.

use catchlab::env::VariantId;
use catchlab::metrics::CurveMetric;
use catchlab::runner::suite::{Study, Suite};

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let variant: VariantId = args.first().map_or(Ok(VariantId::V0), |s| s.parse())?;
    let mut suite = Suite::new(args.get(1).map_or("runs/self-transfer", String::as_str));
    suite.n_seeds = args.get(2).map_or(Ok(5), |s| s.parse())?;
    suite.jobs = args.get(3).map_or(Ok(1), |s| s.parse())?;

    let hybrid = suite.ensure(Study::Hybrid(variant))?.mean(CurveMetric::CatchRate)?;
    let scratch = suite.load(Study::Scratch(variant))?.mean(CurveMetric::CatchRate)?;
    println!("epoch  hybrid  scratch");
    for (h, s) in hybrid.points.iter().zip(&scratch.points) {
        let bar = "#".repeat((h.mean * 40.0).round() as usize);
        println!("{:5}  {:.3}   {:.3}  {bar}", h.epoch, h.mean, s.mean);
    }

    // rise to a first peak, fall to the lowest point after it, then recover
    let m = hybrid.means();
    let peak = (0..m.len()).find(|&i| i + 1 == m.len() || m[i + 1] < m[i]).unwrap_or(0);
    let trough = (peak..m.len()).min_by(|&a, &b| m[a].total_cmp(&m[b])).unwrap_or(peak);
    println!(
        "rise {:+.3} to epoch {}, dip {:+.3} to epoch {}, final {:.3} vs scratch {:.3}",
        m[peak] - m[0],
        hybrid.points[peak].epoch,
        m[trough] - m[peak],
        hybrid.points[trough].epoch,
        m.last().copied().unwrap_or(f64::NAN),
        scratch.final_mean().unwrap_or(f64::NAN)
    );
    Ok(())
}
