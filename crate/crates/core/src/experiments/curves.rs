//! Replicated metric curves and the log-log rate fit.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{gen_stream_replication, gen_theta, shuffled_order, Dataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::Sample;
use crate::optim::{run_stream, Algorithm, Cadence, OptimizerState};
use crate::oracle::GroundTruth;

/// One point of an aggregated curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: u64,
    pub value: f64,
}

pub type CurveSeries = Vec<CurvePoint>;

/// A labelled curve, as produced by [`compare_algorithms`].
#[derive(Clone, Debug, Serialize)]
pub struct AlgoCurve {
    pub algo: String,
    pub series: CurveSeries,
}

/// Synthetic-protocol run configuration.
#[derive(Clone, Debug)]
pub struct SynthRunConfig {
    pub algo: Algorithm,
    pub spec: SyntheticSpec,
    pub n: u64,
    pub cadence: Cadence,
}

impl SynthRunConfig {
    pub fn new(algo: Algorithm, spec: SyntheticSpec, n: u64) -> Self {
        Self {
            algo,
            spec,
            n,
            cadence: Cadence::PowersOfTwo,
        }
    }
}

/// Squared-error curve of a single replication: `(n, ‖θ̂ₙ − θ‖²)` at every
/// cadence point (plus the final step).
pub fn mse_curve_single(config: &SynthRunConfig, replication: u64) -> Result<CurveSeries> {
    let theta = gen_theta(&config.spec);
    let mut state = OptimizerState::at_origin(config.algo, config.spec.dim)?;
    let mut series = CurveSeries::new();
    run_stream(
        &mut state,
        gen_stream_replication(&config.spec, config.n, replication),
        &config.cadence,
        |n, st, _report, _sample| {
            series.push(CurvePoint {
                n,
                value: (st.theta() - &theta).norm_squared(),
            });
            Ok(())
        },
    )
    .map_err(|e| Error::ReplicationFailed {
        replication,
        source: Box::new(e),
    })?;
    Ok(series)
}

/// Mean squared-error curve over `replications` independent streams.
///
/// Replications run in parallel but are averaged in index order, so the
/// result is bit-identical for any worker count and equals the average of
/// the individually produced curves exactly.
pub fn mse_curve(config: &SynthRunConfig, replications: u64) -> Result<CurveSeries> {
    if replications == 0 {
        return Err(Error::Empty { what: "replication budget" });
    }
    let singles: Vec<CurveSeries> = (0..replications)
        .into_par_iter()
        .map(|r| mse_curve_single(config, r))
        .collect::<Result<_>>()?;
    average_series(&singles)
}

/// Pointwise average of aligned series, summed in slice order.
pub fn average_series(series: &[CurveSeries]) -> Result<CurveSeries> {
    let first = series.first().ok_or(Error::Empty { what: "series list" })?;
    for s in series {
        if s.len() != first.len() || s.iter().zip(first).any(|(a, b)| a.n != b.n) {
            return Err(Error::DiagnosticPrecondition(
                "replication curves are not aligned on the same cadence".into(),
            ));
        }
    }
    Ok((0..first.len())
        .map(|j| {
            let sum: f64 = series.iter().map(|s| s[j].value).sum();
            CurvePoint {
                n: first[j].n,
                value: sum / series.len() as f64,
            }
        })
        .collect())
}

/// Default fit window for rate slopes: two decades ending at the synthetic
/// protocol horizon.
pub const DEFAULT_RATE_WINDOW: (f64, f64) = (1e3, 1e5);

/// Least-squares slope of `log(value)` against `log(n)` over a window.
///
/// Demands at least five points spanning at least two decades, so the fit
/// cannot silently degenerate into noise.
pub fn rate_slope(series: &[CurvePoint], window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|p| (window.0..=window.1).contains(&(p.n as f64)) && p.value > 0.0)
        .map(|p| ((p.n as f64).ln(), p.value.ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::DiagnosticPrecondition(format!(
            "rate fit needs at least 5 points in the window, got {}",
            pts.len()
        )));
    }
    let span = pts
        .iter()
        .map(|p| p.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |acc, x| {
            (acc.0.min(x), acc.1.max(x))
        });
    // Slack of one power of two on the two-decade span: cadence grids are
    // power-of-two shaped, so the widest pair inside [1e3, 1e5] is 1024 to
    // the horizon.
    if span.1 - span.0 < (50.0f64).ln() {
        return Err(Error::DiagnosticPrecondition(
            "rate fit window spans fewer than two decades".into(),
        ));
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::DiagnosticPrecondition("degenerate fit window".into()));
    }
    Ok(sxy / sxx)
}

/// Aligned curves for a set of algorithms on one shared spec, plus the
/// observed ordering by final value (best first).
pub fn compare_algorithms(
    algos: &[Algorithm],
    spec: &SyntheticSpec,
    n: u64,
    replications: u64,
) -> Result<(Vec<AlgoCurve>, Vec<String>)> {
    let curves: Vec<AlgoCurve> = algos
        .iter()
        .map(|&algo| {
            let config = SynthRunConfig::new(algo, *spec, n);
            Ok(AlgoCurve {
                algo: algo.tag().to_string(),
                series: mse_curve(&config, replications)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<(String, f64)> = curves
        .iter()
        .map(|c| {
            let last = c.series.last().map(|p| p.value).unwrap_or(f64::INFINITY);
            (c.algo.clone(), last)
        })
        .collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok((curves, order.into_iter().map(|(name, _)| name).collect()))
}

/// Real-data protocol: stream the training set in `replications` different
/// shuffled orders and average test-set excess risk at cadence points.
#[derive(Clone, Debug)]
pub struct RealRunConfig {
    pub algo: Algorithm,
    pub shuffle_seed: u64,
    pub cadence: Cadence,
}

pub fn real_excess_curve(
    config: &RealRunConfig,
    train: &Dataset,
    truth: &GroundTruth,
    test: &[Sample],
    replications: u64,
) -> Result<CurveSeries> {
    if replications == 0 {
        return Err(Error::Empty { what: "replication budget" });
    }
    if train.is_empty() {
        return Err(Error::Empty { what: "training set" });
    }
    let singles: Vec<CurveSeries> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let order = shuffled_order(train.len(), config.shuffle_seed, r);
            let mut state = OptimizerState::at_origin(config.algo, train.dim())?;
            let mut series = CurveSeries::new();
            let stream = order.iter().map(|&i| train.samples[i].clone());
            run_stream(&mut state, stream, &config.cadence, |n, st, _, _| {
                series.push(CurvePoint {
                    n,
                    value: crate::oracle::excess_risk(st.theta(), truth, test)?,
                });
                Ok(())
            })
            .map_err(|e| Error::ReplicationFailed {
                replication: r,
                source: Box::new(e),
            })?;
            Ok(series)
        })
        .collect::<Result<_>>()?;
    average_series(&singles)
}

/// Squared distance of a final iterate from the truth, for quick checks.
pub fn final_sq_error(series: &[CurvePoint]) -> Option<f64> {
    series.last().map(|p| p.value)
}

/// Value of the curve at exactly `n`, if that cadence point exists.
pub fn value_at(series: &[CurvePoint], n: u64) -> Option<f64> {
    series.iter().find(|p| p.n == n).map(|p| p.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HybridWeights;
    use approx::assert_relative_eq;

    fn hsn(alpha: f64, beta: f64) -> Algorithm {
        Algorithm::Hsn {
            weights: HybridWeights::new(alpha, beta).unwrap(),
        }
    }

    #[test]
    fn single_curve_final_point() {
        let spec = SyntheticSpec::new(3, 1, 2);
        let config = SynthRunConfig {
            algo: hsn(0.5, 0.5),
            spec,
            n: 100,
            cadence: Cadence::Explicit(vec![100]),
        };
        let series = mse_curve_single(&config, 0).unwrap();
        assert_eq!(series.len(), 1);
        assert_eq!(series[0].n, 100);
        assert!(series[0].value > 0.0);
    }

    #[test]
    fn engineered_start_at_truth_gives_zero() {
        let spec = SyntheticSpec::new(3, 5, 6);
        let theta = gen_theta(&spec);
        let mut state = OptimizerState::new(hsn(0.5, 0.5), theta.clone()).unwrap();
        // consuming zero samples keeps the error at exactly zero
        run_stream(&mut state, Vec::new(), &Cadence::PowersOfTwo, |_, _, _, _| Ok(()))
            .unwrap();
        assert_eq!((state.theta() - &theta).norm_squared(), 0.0);
    }

    #[test]
    fn mean_curve_equals_average_of_singles_exactly() {
        let spec = SyntheticSpec::new(4, 11, 12);
        let config = SynthRunConfig::new(hsn(0.5, 0.5), spec, 256);
        let reps = 5u64;
        let mean = mse_curve(&config, reps).unwrap();
        let singles: Vec<CurveSeries> = (0..reps)
            .map(|r| mse_curve_single(&config, r).unwrap())
            .collect();
        for (j, point) in mean.iter().enumerate() {
            let expected: f64 = singles.iter().map(|s| s[j].value).sum::<f64>() / reps as f64;
            assert_eq!(point.value, expected, "point {j} not an exact average");
        }
    }

    #[test]
    fn mse_curve_deterministic() {
        let spec = SyntheticSpec::new(3, 21, 22);
        let config = SynthRunConfig::new(hsn(0.3, 0.7), spec, 512);
        let a = mse_curve(&config, 4).unwrap();
        let b = mse_curve(&config, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rate_slope_exact_power_law() {
        let series: CurveSeries = (3..=17)
            .map(|k| {
                let n = 1u64 << k;
                CurvePoint {
                    n,
                    value: 7.0 / n as f64,
                }
            })
            .collect();
        let slope = rate_slope(&series, (1.0, 1e6)).unwrap();
        assert_relative_eq!(slope, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn rate_slope_log_over_n() {
        // C log(n)/n over [1e3, 1e5] sits between −1 and −0.85
        let series: CurveSeries = (10..=17)
            .map(|k| {
                let n = 1u64 << k;
                CurvePoint {
                    n,
                    value: 3.0 * (n as f64).ln() / n as f64,
                }
            })
            .collect();
        let slope = rate_slope(&series, DEFAULT_RATE_WINDOW).unwrap();
        assert!((-1.0..-0.85).contains(&slope), "slope {slope}");
    }

    #[test]
    fn rate_slope_constant_series_is_zero() {
        let series: CurveSeries = (10..=17)
            .map(|k| CurvePoint {
                n: 1u64 << k,
                value: 2.5,
            })
            .collect();
        let slope = rate_slope(&series, DEFAULT_RATE_WINDOW).unwrap();
        assert!(slope.abs() <= 1e-12);
    }

    #[test]
    fn rate_slope_rejects_thin_windows() {
        let series: CurveSeries = vec![
            CurvePoint { n: 1000, value: 1.0 },
            CurvePoint { n: 2000, value: 0.5 },
        ];
        assert!(rate_slope(&series, DEFAULT_RATE_WINDOW).is_err());
    }

    #[test]
    fn compare_includes_identical_hsn_ons_rows() {
        let spec = SyntheticSpec::new(3, 31, 32);
        let algos = [Algorithm::Ons, hsn(0.0, 1.0)];
        let (curves, _order) = compare_algorithms(&algos, &spec, 512, 2).unwrap();
        assert_eq!(curves[0].series, curves[1].series);
    }
}
