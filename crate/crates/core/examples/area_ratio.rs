//! The area-ratio transfer score on hand-made curves.
//!
//! cargo run --release --example area_ratio

use catchlab::metrics::{
    area_ratio, area_under_curve, mean_series, transfer_sign, AggregatedCurve, AreaRatio,
    DEFAULT_DEAD_ZONE,
};

fn main() -> anyhow::Result<()> {
    let epochs: Vec<u32> = (1..=10).collect();
    let scratch: Vec<f64> = epochs.iter().map(|&e| 1.0 - (-0.3 * f64::from(e)).exp()).collect();
    let head_start: Vec<f64> = epochs.iter().map(|&e| (0.6 + 0.05 * f64::from(e)).min(1.0)).collect();
    let stuck: Vec<f64> = vec![0.2; epochs.len()];

    let scratch_curve = AggregatedCurve::from_series(&epochs, &scratch);
    println!("scratch area {:.4}", area_under_curve(&scratch_curve)?);
    for (name, values) in [("head start", &head_start), ("stuck", &stuck), ("scratch", &scratch)] {
        let r = area_ratio(&AggregatedCurve::from_series(&epochs, values), &scratch_curve)?;
        println!(
            "{name:10}  area {:.4}  r = {:+.3}  ({})",
            r.transfer_area,
            r.r,
            r.sign(DEFAULT_DEAD_ZONE)
        );
    }

    let anchor = AreaRatio::from_areas(172.9, 100.0)?;
    println!("172.9 over 100 -> r = {:.3}", anchor.r);
    println!("r = 0.03 is {}", transfer_sign(0.03, DEFAULT_DEAD_ZONE));

    // seed-mean with a ±1 std band, as written to aggregate.csv
    let seeds = vec![
        (epochs.clone(), scratch.clone()),
        (epochs.clone(), head_start.clone()),
        (epochs.clone(), stuck.clone()),
    ];
    let mean = mean_series(&seeds)?;
    for p in mean.points.iter().step_by(3) {
        println!("epoch {:2}: {:.3} ± {:.3} over {} seeds", p.epoch, p.mean, p.std, p.seeds);
    }
    Ok(())
}
