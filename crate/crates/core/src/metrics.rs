//! Learning-curve aggregation and the area-ratio transfer score.

use std::fmt;

use thiserror::Error;

use crate::agent::LearningCurve;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no curves to aggregate")]
    NoCurves,
    #[error("epoch grids diverge at position {position}: epoch {left} vs {right}")]
    GridMismatch { position: usize, left: u32, right: u32 },
    #[error("curves have different lengths ({left} vs {right} points)")]
    LengthMismatch { left: usize, right: usize },
    #[error("area needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("scratch area is {0}; the area ratio is undefined for non-positive baselines")]
    UndefinedRatio(f64),
}

/// One aggregated point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregatedPoint {
    pub epoch: u32,
    pub mean: f64,
    /// Population standard deviation across seeds.
    pub std: f64,
    pub seeds: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregatedCurve {
    pub points: Vec<AggregatedPoint>,
}

impl AggregatedCurve {
    /// A single deterministic series, `std = 0`.
    pub fn from_series(epochs: &[u32], values: &[f64]) -> Self {
        assert_eq!(epochs.len(), values.len());
        AggregatedCurve {
            points: epochs
                .iter()
                .zip(values)
                .map(|(&epoch, &mean)| AggregatedPoint {
                    epoch,
                    mean,
                    std: 0.0,
                    seeds: 1,
                })
                .collect(),
        }
    }

    pub fn epochs(&self) -> Vec<u32> {
        self.points.iter().map(|p| p.epoch).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }

    pub fn final_mean(&self) -> Option<f64> {
        self.points.last().map(|p| p.mean)
    }

    /// First epoch whose mean reaches `threshold`.
    pub fn first_epoch_reaching(&self, threshold: f64) -> Option<u32> {
        self.points
            .iter()
            .find(|p| p.mean >= threshold)
            .map(|p| p.epoch)
    }

    /// Multiplies every mean and std by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        AggregatedCurve {
            points: self
                .points
                .iter()
                .map(|p| AggregatedPoint {
                    mean: p.mean * factor,
                    std: p.std * factor.abs(),
                    ..*p
                })
                .collect(),
        }
    }
}

/// Pointwise mean and population stddev of per-seed series on a shared grid.
pub fn mean_series(series: &[(Vec<u32>, Vec<f64>)]) -> Result<AggregatedCurve, MetricsError> {
    let (first_epochs, _) = series.first().ok_or(MetricsError::NoCurves)?;
    for (epochs, values) in series {
        assert_eq!(epochs.len(), values.len(), "series with ragged epochs/values");
        for (position, (a, b)) in first_epochs.iter().zip(epochs).enumerate() {
            if a != b {
                return Err(MetricsError::GridMismatch {
                    position,
                    left: *a,
                    right: *b,
                });
            }
        }
        if epochs.len() != first_epochs.len() {
            return Err(MetricsError::LengthMismatch {
                left: first_epochs.len(),
                right: epochs.len(),
            });
        }
    }
    let n = series.len() as f64;
    let points = first_epochs
        .iter()
        .enumerate()
        .map(|(i, &epoch)| {
            let mean = series.iter().map(|(_, v)| v[i]).sum::<f64>() / n;
            let var = series.iter().map(|(_, v)| (v[i] - mean).powi(2)).sum::<f64>() / n;
            AggregatedPoint {
                epoch,
                mean,
                std: var.sqrt(),
                seeds: series.len(),
            }
        })
        .collect();
    Ok(AggregatedCurve { points })
}

/// Which per-epoch quantity of a [`LearningCurve`] to aggregate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CurveMetric {
    #[default]
    CatchRate,
    MeanReturn,
}

impl CurveMetric {
    fn extract(self, curve: &LearningCurve) -> Vec<f64> {
        match self {
            CurveMetric::CatchRate => curve.catch_rates(),
            CurveMetric::MeanReturn => curve.mean_returns(),
        }
    }
}

/// Seed-mean of several learning curves on the chosen metric.
pub fn mean_curve(
    curves: &[LearningCurve],
    metric: CurveMetric,
) -> Result<AggregatedCurve, MetricsError> {
    let series: Vec<(Vec<u32>, Vec<f64>)> = curves
        .iter()
        .map(|c| (c.epochs(), metric.extract(c)))
        .collect();
    mean_series(&series)
}

/// Trapezoidal area under the mean series over the epoch grid.
pub fn area_under_curve(curve: &AggregatedCurve) -> Result<f64, MetricsError> {
    let pts = &curve.points;
    if pts.len() < 2 {
        return Err(MetricsError::TooFewPoints(pts.len()));
    }
    Ok(pts
        .windows(2)
        .map(|w| 0.5 * f64::from(w[1].epoch - w[0].epoch) * (w[0].mean + w[1].mean))
        .sum())
}

/// Area-ratio transfer score.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AreaRatio {
    pub r: f64,
    pub transfer_area: f64,
    pub scratch_area: f64,
}

impl AreaRatio {
    /// `(transfer_area - scratch_area) / scratch_area`.
    pub fn from_areas(transfer_area: f64, scratch_area: f64) -> Result<Self, MetricsError> {
        if !(scratch_area > 0.0) {
            return Err(MetricsError::UndefinedRatio(scratch_area));
        }
        Ok(AreaRatio {
            r: (transfer_area - scratch_area) / scratch_area,
            transfer_area,
            scratch_area,
        })
    }

    pub fn sign(&self, dead_zone: f64) -> TransferSign {
        transfer_sign(self.r, dead_zone)
    }
}

pub fn area_ratio(
    transfer: &AggregatedCurve,
    scratch: &AggregatedCurve,
) -> Result<AreaRatio, MetricsError> {
    if transfer.points.len() != scratch.points.len() {
        return Err(MetricsError::LengthMismatch {
            left: transfer.points.len(),
            right: scratch.points.len(),
        });
    }
    for (position, (a, b)) in transfer.points.iter().zip(&scratch.points).enumerate() {
        if a.epoch != b.epoch {
            return Err(MetricsError::GridMismatch {
                position,
                left: a.epoch,
                right: b.epoch,
            });
        }
    }
    AreaRatio::from_areas(area_under_curve(transfer)?, area_under_curve(scratch)?)
}

/// Ratio computed per seed, then averaged; reported next to the mean-curve ratio.
pub fn mean_per_seed_area(curves: &[(Vec<u32>, Vec<f64>)]) -> Result<f64, MetricsError> {
    if curves.is_empty() {
        return Err(MetricsError::NoCurves);
    }
    let mut total = 0.0;
    for c in curves {
        total += area_under_curve(&AggregatedCurve::from_series(&c.0, &c.1))?;
    }
    Ok(total / curves.len() as f64)
}

pub const DEFAULT_DEAD_ZONE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TransferSign {
    Positive,
    Absent,
    Negative,
}

impl fmt::Display for TransferSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransferSign::Positive => "positive",
            TransferSign::Absent => "absent",
            TransferSign::Negative => "negative",
        })
    }
}

pub fn transfer_sign(r: f64, dead_zone: f64) -> TransferSign {
    if r > dead_zone {
        TransferSign::Positive
    } else if r < -dead_zone {
        TransferSign::Negative
    } else {
        TransferSign::Absent
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flat(epochs: std::ops::RangeInclusive<u32>, value: f64) -> AggregatedCurve {
        let e: Vec<u32> = epochs.collect();
        let v = vec![value; e.len()];
        AggregatedCurve::from_series(&e, &v)
    }

    /// Independent trapezoid: sums left/right Riemann sums and halves them.
    fn trapezoid_oracle(epochs: &[u32], values: &[f64]) -> f64 {
        let mut left = 0.0;
        let mut right = 0.0;
        for i in 1..epochs.len() {
            let dx = f64::from(epochs[i]) - f64::from(epochs[i - 1]);
            left += dx * values[i - 1];
            right += dx * values[i];
        }
        (left + right) / 2.0
    }

    #[test]
    fn single_curve_has_zero_std() {
        let c = mean_series(&[(vec![1, 2, 3], vec![0.1, 0.5, 0.9])]).unwrap();
        assert_eq!(c.means(), vec![0.1, 0.5, 0.9]);
        assert!(c.points.iter().all(|p| p.std == 0.0 && p.seeds == 1));
    }

    #[test]
    fn two_constant_curves() {
        let c = mean_series(&[
            (vec![1, 2], vec![0.4, 0.4]),
            (vec![1, 2], vec![0.6, 0.6]),
        ])
        .unwrap();
        for p in &c.points {
            assert!((p.mean - 0.5).abs() < 1e-15);
            assert!((p.std - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn grid_mismatch_names_first_divergent_epoch() {
        let err = mean_series(&[
            (vec![1, 2, 3], vec![0.0; 3]),
            (vec![1, 2, 4], vec![0.0; 3]),
        ])
        .unwrap_err();
        assert_eq!(
            err,
            MetricsError::GridMismatch {
                position: 2,
                left: 3,
                right: 4
            }
        );
        assert_eq!(mean_series(&[]), Err(MetricsError::NoCurves));
    }

    #[test]
    fn rectangle_and_triangle() {
        assert_eq!(area_under_curve(&flat(1..=11, 1.0)).unwrap(), 10.0);
        let e: Vec<u32> = (0..=10).collect();
        let v: Vec<f64> = e.iter().map(|&x| f64::from(x) / 10.0).collect();
        let area = area_under_curve(&AggregatedCurve::from_series(&e, &v)).unwrap();
        assert!((area - 5.0).abs() < 1e-12);
        assert_eq!(
            area_under_curve(&flat(1..=1, 1.0)),
            Err(MetricsError::TooFewPoints(1))
        );
    }

    #[test]
    fn random_curve_matches_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(50);
        let mut epochs = Vec::new();
        let mut e = 0u32;
        for _ in 0..50 {
            e += rng.gen_range(1..4);
            epochs.push(e);
        }
        let values: Vec<f64> = (0..50).map(|_| rng.gen::<f64>()).collect();
        let got = area_under_curve(&AggregatedCurve::from_series(&epochs, &values)).unwrap();
        let want = trapezoid_oracle(&epochs, &values);
        assert!((got - want).abs() <= 1e-12 * want.abs());
    }

    #[test]
    fn ratio_examples() {
        let c = flat(1..=10, 0.7);
        assert_eq!(area_ratio(&c, &c).unwrap().r, 0.0);
        let zero = flat(1..=10, 0.0);
        assert_eq!(area_ratio(&zero, &c).unwrap().r, -1.0);
        let r = AreaRatio::from_areas(172.9, 100.0).unwrap();
        assert!((r.r - 0.729).abs() < 1e-12);
        assert!(matches!(
            area_ratio(&c, &zero),
            Err(MetricsError::UndefinedRatio(_))
        ));
    }

    #[test]
    fn sign_classification() {
        assert_eq!(transfer_sign(0.729, DEFAULT_DEAD_ZONE), TransferSign::Positive);
        assert_eq!(transfer_sign(-0.017, DEFAULT_DEAD_ZONE), TransferSign::Absent);
        assert_eq!(transfer_sign(-0.41, DEFAULT_DEAD_ZONE), TransferSign::Negative);
    }

    fn curve_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..30, 1usize..6).prop_flat_map(|(len, seeds)| {
            prop::collection::vec(prop::collection::vec(0.0f64..1.0, len), seeds)
        })
    }

    proptest! {
        #[test]
        fn seed_order_does_not_matter(curves in curve_strategy()) {
            let epochs: Vec<u32> = (1..=curves[0].len() as u32).collect();
            let series: Vec<_> = curves.iter().map(|v| (epochs.clone(), v.clone())).collect();
            let mut reversed = series.clone();
            reversed.reverse();
            let a = mean_series(&series).unwrap();
            let b = mean_series(&reversed).unwrap();
            for (p, q) in a.points.iter().zip(&b.points) {
                prop_assert!((p.mean - q.mean).abs() <= 1e-12);
                prop_assert!((p.std - q.std).abs() <= 1e-12);
            }
        }

        #[test]
        fn area_of_mean_is_mean_of_areas(curves in curve_strategy()) {
            let epochs: Vec<u32> = (1..=curves[0].len() as u32).collect();
            let series: Vec<_> = curves.iter().map(|v| (epochs.clone(), v.clone())).collect();
            let of_mean = area_under_curve(&mean_series(&series).unwrap()).unwrap();
            let mean_of = mean_per_seed_area(&series).unwrap();
            prop_assert!((of_mean - mean_of).abs() <= 1e-12 * of_mean.abs().max(1e-300));
        }

        #[test]
        fn ratio_is_scale_invariant(
            t in prop::collection::vec(0.01f64..1.0, 10),
            s in prop::collection::vec(0.01f64..1.0, 10),
            k in 0.01f64..100.0,
        ) {
            let e: Vec<u32> = (1..=10).collect();
            let tc = AggregatedCurve::from_series(&e, &t);
            let sc = AggregatedCurve::from_series(&e, &s);
            let r1 = area_ratio(&tc, &sc).unwrap().r;
            let r2 = area_ratio(&tc.scaled(k), &sc.scaled(k)).unwrap().r;
            prop_assert!((r1 - r2).abs() <= 1e-9 * (1.0 + r1.abs()));
        }

        #[test]
        fn swapping_roles_maps_r_to_minus_r_over_one_plus_r(
            t in 0.01f64..100.0,
            s in 0.01f64..100.0,
        ) {
            let r = AreaRatio::from_areas(t, s).unwrap().r;
            let swapped = AreaRatio::from_areas(s, t).unwrap().r;
            prop_assert!(r > -1.0);
            prop_assert!((swapped - (-r / (1.0 + r))).abs() <= 1e-9 * (1.0 + swapped.abs()));
        }
    }
}
