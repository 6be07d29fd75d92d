//! Curve CSV files.
//!
//! Per-seed files use the header in [`SEED_HEADER`]; aggregates use
//! [`AGGREGATE_HEADER`]. Floats are written with Rust's shortest round-trip
//! formatting, so identical curves give identical bytes.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::agent::{CurveRecord, LearningCurve};
use crate::metrics::{mean_series, AggregatedCurve, AggregatedPoint, CurveMetric};

pub const SEED_HEADER: [&str; 8] = [
    "seed",
    "epoch",
    "env_steps",
    "episodes",
    "eval_catch_rate",
    "eval_mean_return",
    "mean_loss",
    "epsilon",
];

pub const AGGREGATE_HEADER: [&str; 6] = [
    "epoch",
    "seeds",
    "catch_rate_mean",
    "catch_rate_std",
    "return_mean",
    "return_std",
];

fn to_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    Ok(w.into_inner().context("flushing csv")?)
}

pub fn seed_curve_csv(seed: u64, curve: &LearningCurve) -> Result<Vec<u8>> {
    to_bytes(
        &SEED_HEADER,
        curve.records.iter().map(|r| {
            vec![
                seed.to_string(),
                r.epoch.to_string(),
                r.env_steps.to_string(),
                r.episodes.to_string(),
                r.eval_catch_rate.to_string(),
                r.eval_mean_return.to_string(),
                r.mean_loss.to_string(),
                r.epsilon.to_string(),
            ]
        }),
    )
}

pub fn aggregate_csv(catch: &AggregatedCurve, returns: &AggregatedCurve) -> Result<Vec<u8>> {
    if catch.epochs() != returns.epochs() {
        bail!("catch-rate and return aggregates have different epoch grids");
    }
    to_bytes(
        &AGGREGATE_HEADER,
        catch.points.iter().zip(&returns.points).map(|(c, r)| {
            vec![
                c.epoch.to_string(),
                c.seeds.to_string(),
                c.mean.to_string(),
                c.std.to_string(),
                r.mean.to_string(),
                r.std.to_string(),
            ]
        }),
    )
}

/// Per-seed curves read back from a CSV, keyed by seed.
pub fn read_seed_curves(text: &str) -> Result<BTreeMap<u64, LearningCurve>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != SEED_HEADER {
        bail!("unexpected curve header `{}`", header.join(","));
    }
    let mut out: BTreeMap<u64, LearningCurve> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let field = |j: usize| row.get(j).unwrap_or("");
        let line = i + 2;
        let parse_f = |j: usize| -> Result<f64> {
            field(j)
                .parse()
                .with_context(|| format!("line {line}: bad `{}`", SEED_HEADER[j]))
        };
        let parse_u = |j: usize| -> Result<u64> {
            field(j)
                .parse()
                .with_context(|| format!("line {line}: bad `{}`", SEED_HEADER[j]))
        };
        let record = CurveRecord {
            epoch: u32::try_from(parse_u(1)?)?,
            env_steps: parse_u(2)?,
            episodes: parse_u(3)?,
            eval_catch_rate: parse_f(4)?,
            eval_mean_return: parse_f(5)?,
            mean_loss: parse_f(6)?,
            epsilon: parse_f(7)?,
        };
        let curve = out.entry(parse_u(0)?).or_default();
        if curve.records.last().is_some_and(|l| l.epoch >= record.epoch) {
            bail!("line {line}: epochs must increase within a seed");
        }
        curve.records.push(record);
    }
    Ok(out)
}

/// Reads either CSV flavour as an aggregated curve on `metric`.
pub fn read_aggregate(path: &Path, metric: CurveMetric) -> Result<AggregatedCurve> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = text.lines().next().unwrap_or("");
    if first.trim() == SEED_HEADER.join(",") {
        let curves = read_seed_curves(&text).with_context(|| path.display().to_string())?;
        let series: Vec<(Vec<u32>, Vec<f64>)> = curves
            .values()
            .map(|c| {
                let values = match metric {
                    CurveMetric::CatchRate => c.catch_rates(),
                    CurveMetric::MeanReturn => c.mean_returns(),
                };
                (c.epochs(), values)
            })
            .collect();
        return Ok(mean_series(&series)?);
    }
    if first.trim() != AGGREGATE_HEADER.join(",") {
        bail!("{}: unrecognised curve header `{first}`", path.display());
    }
    let (mean_col, std_col) = match metric {
        CurveMetric::CatchRate => (2, 3),
        CurveMetric::MeanReturn => (4, 5),
    };
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut points = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let get = |j: usize| row.get(j).unwrap_or("");
        points.push(AggregatedPoint {
            epoch: get(0).parse()?,
            seeds: get(1).parse()?,
            mean: get(mean_col).parse()?,
            std: get(std_col).parse()?,
        });
    }
    if points.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(AggregatedCurve { points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(offset: f64) -> LearningCurve {
        let mut c = LearningCurve::default();
        for epoch in 1..=3u32 {
            c.push(CurveRecord {
                epoch,
                env_steps: u64::from(epoch) * 20,
                episodes: u64::from(epoch),
                eval_catch_rate: 0.1 * f64::from(epoch) + offset,
                eval_mean_return: 0.2 * f64::from(epoch),
                mean_loss: if epoch == 1 { f64::NAN } else { 0.01 },
                epsilon: 1.0 / f64::from(epoch),
            });
        }
        c
    }

    #[test]
    fn seed_csv_round_trips() {
        let c = curve(0.0);
        let bytes = seed_curve_csv(7, &c).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with(
            "seed,epoch,env_steps,episodes,eval_catch_rate,eval_mean_return,mean_loss,epsilon\n"
        ));
        let back = read_seed_curves(&text).unwrap();
        let got = &back[&7];
        assert_eq!(got.len(), 3);
        assert!(got.records[0].mean_loss.is_nan());
        assert_eq!(got.records[1..], c.records[1..]);
    }

    #[test]
    fn both_flavours_give_the_same_mean() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (curve(0.0), curve(0.3));
        let mut joined = seed_curve_csv(0, &a).unwrap();
        let second = String::from_utf8(seed_curve_csv(1, &b).unwrap()).unwrap();
        joined.extend(second.lines().skip(1).flat_map(|l| format!("{l}\n").into_bytes()));
        let seeds_path = dir.path().join("seeds.csv");
        std::fs::write(&seeds_path, &joined).unwrap();

        let catch = crate::metrics::mean_curve(&[a.clone(), b.clone()], CurveMetric::CatchRate).unwrap();
        let ret = crate::metrics::mean_curve(&[a, b], CurveMetric::MeanReturn).unwrap();
        let agg_path = dir.path().join("agg.csv");
        std::fs::write(&agg_path, aggregate_csv(&catch, &ret).unwrap()).unwrap();

        let from_seeds = read_aggregate(&seeds_path, CurveMetric::CatchRate).unwrap();
        let from_agg = read_aggregate(&agg_path, CurveMetric::CatchRate).unwrap();
        assert_eq!(from_seeds, catch);
        assert_eq!(from_agg, catch);
    }

    #[test]
    fn rejects_foreign_headers() {
        assert!(read_seed_curves("a,b\n1,2\n").is_err());
    }
}
