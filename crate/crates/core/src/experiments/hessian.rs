//! Curvature-matrix convergence diagnostic.
//!
//! The averaged matrices converge almost surely — `H̄ₙ` and `Σ̄ₙ` to the
//! Hessian at the truth, `S̄ₙ` to `(α+β)` times it — with squared distances
//! decaying like `log(n)/n`. The diagnostic tracks all four distance
//! curves across replications and fits the log-log slope of the mean
//! squared `S̄ₙ` distance.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{gen_stream_replication, gen_theta, SyntheticSpec};
use crate::error::{Error, Result};
use crate::optim::{run_stream, Algorithm, Cadence, OptimizerState};
use crate::oracle::{synthetic_truth, UniformFeatures};

use super::curves::{average_series, rate_slope, CurvePoint, CurveSeries, DEFAULT_RATE_WINDOW};
use super::report::{DiagnosticEntry, DiagnosticReport};

#[derive(Clone, Debug)]
pub struct HessianConfig {
    pub algo: Algorithm,
    pub spec: SyntheticSpec,
    pub n: u64,
    pub replications: u64,
    pub oracle_seed: u64,
    pub oracle_samples: u64,
    /// Window for the rate fit on the squared `S̄` distance.
    pub slope_window: (f64, f64),
    /// Acceptance band for the fitted slope; `None` reports the slope as
    /// informational only (baseline runs).
    pub slope_band: Option<(f64, f64)>,
}

impl HessianConfig {
    pub fn new(algo: Algorithm, spec: SyntheticSpec, n: u64, replications: u64) -> Self {
        Self {
            algo,
            spec,
            n,
            replications,
            oracle_seed: 1,
            oracle_samples: 1_000_000,
            slope_window: DEFAULT_RATE_WINDOW,
            slope_band: Some(SLOPE_BAND),
        }
    }
}

/// Mean distance curves over replications (Frobenius norms), plus the mean
/// squared `S̄` distance used for the slope fit.
#[derive(Clone, Debug, Serialize)]
pub struct HessianCurves {
    pub sbar_dist: CurveSeries,
    pub sbar_inv_dist: CurveSeries,
    pub hbar_dist: CurveSeries,
    pub sigbar_dist: CurveSeries,
    pub sbar_sq_dist: CurveSeries,
    pub hbar_sigbar_dist: CurveSeries,
}

/// Band the fitted slope of the squared distance must land in.
pub const SLOPE_BAND: (f64, f64) = (-1.2, -0.7);

pub fn hessian_convergence(config: &HessianConfig) -> Result<(DiagnosticReport, HessianCurves)> {
    if !config.algo.is_second_order() {
        return Err(Error::DiagnosticPrecondition(
            "curvature diagnostics need a second-order algorithm".into(),
        ));
    }
    if config.replications == 0 {
        return Err(Error::Empty { what: "replication budget" });
    }
    let d = config.spec.dim;
    let theta = gen_theta(&config.spec);
    let sampler = UniformFeatures { dim: d };
    let truth = synthetic_truth(&theta, &sampler, config.oracle_seed, config.oracle_samples)?;
    let scale = config.algo.curvature_scale();
    let s_target = truth.hessian.scale(scale);
    let s_inv_target = truth.hessian_inv.scale(1.0 / scale);

    struct RepCurves {
        sbar: CurveSeries,
        sbar_inv: CurveSeries,
        hbar: CurveSeries,
        sigbar: CurveSeries,
        sbar_sq: CurveSeries,
        mutual: CurveSeries,
    }

    let cadence = Cadence::powers_of_two_with(config.n, &[1_000, 10_000, 100_000, config.n]);
    let per_rep: Vec<RepCurves> = (0..config.replications)
        .into_par_iter()
        .map(|r| -> Result<RepCurves> {
            let mut h_sum = DMatrix::<f64>::zeros(d, d);
            let mut sig_sum = DMatrix::<f64>::zeros(d, d);
            let mut s_sum = DMatrix::<f64>::identity(d, d);
            let mut out = RepCurves {
                sbar: Vec::new(),
                sbar_inv: Vec::new(),
                hbar: Vec::new(),
                sigbar: Vec::new(),
                sbar_sq: Vec::new(),
                mutual: Vec::new(),
            };
            let mut state = OptimizerState::at_origin(config.algo, d)?;
            run_stream(
                &mut state,
                gen_stream_replication(&config.spec, config.n, r),
                &Cadence::EveryStep,
                |k, st, report, sample| {
                    h_sum.ger(report.a, sample.phi(), sample.phi(), 1.0);
                    sig_sum.ger(report.b, sample.phi(), sample.phi(), 1.0);
                    s_sum.ger(report.c, sample.phi(), sample.phi(), 1.0);
                    if cadence.hits(k) {
                        let kf = k as f64;
                        let sbar_dist = (&s_sum / kf - s_target.matrix()).norm();
                        let sbar_inv = st.s_inv().expect("second-order state").matrix() * kf;
                        out.sbar.push(CurvePoint { n: k, value: sbar_dist });
                        out.sbar_sq.push(CurvePoint {
                            n: k,
                            value: sbar_dist * sbar_dist,
                        });
                        out.sbar_inv.push(CurvePoint {
                            n: k,
                            value: (sbar_inv - s_inv_target.matrix()).norm(),
                        });
                        out.hbar.push(CurvePoint {
                            n: k,
                            value: (&h_sum / kf - truth.hessian.matrix()).norm(),
                        });
                        out.sigbar.push(CurvePoint {
                            n: k,
                            value: (&sig_sum / kf - truth.hessian.matrix()).norm(),
                        });
                        out.mutual.push(CurvePoint {
                            n: k,
                            value: (&h_sum / kf - &sig_sum / kf).norm(),
                        });
                    }
                    Ok(())
                },
            )
            .map_err(|e| Error::ReplicationFailed {
                replication: r,
                source: Box::new(e),
            })?;
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let collect = |f: fn(&RepCurves) -> &CurveSeries| -> Result<CurveSeries> {
        let all: Vec<CurveSeries> = per_rep.iter().map(|rc| f(rc).clone()).collect();
        average_series(&all)
    };
    let curves = HessianCurves {
        sbar_dist: collect(|rc| &rc.sbar)?,
        sbar_inv_dist: collect(|rc| &rc.sbar_inv)?,
        hbar_dist: collect(|rc| &rc.hbar)?,
        sigbar_dist: collect(|rc| &rc.sigbar)?,
        sbar_sq_dist: collect(|rc| &rc.sbar_sq)?,
        hbar_sigbar_dist: collect(|rc| &rc.mutual)?,
    };

    let slope = rate_slope(&curves.sbar_sq_dist, config.slope_window)?;
    let entries = match config.slope_band {
        Some((lo, hi)) => vec![DiagnosticEntry::band("sbar_sq_slope", slope, lo, hi)],
        None => Vec::new(),
    };
    let first = |s: &CurveSeries| s.first().map(|p| p.value).unwrap_or(f64::NAN);
    let last = |s: &CurveSeries| s.last().map(|p| p.value).unwrap_or(f64::NAN);
    let report = DiagnosticReport::new("hessian_convergence", config.replications, entries)
        .with_info("sbar_sq_slope", slope)
        .with_info("curvature_scale", scale)
        .with_info("sbar_dist_final", last(&curves.sbar_dist))
        .with_info("sbar_inv_dist_final", last(&curves.sbar_inv_dist))
        .with_info("hbar_dist_first", first(&curves.hbar_dist))
        .with_info("hbar_dist_final", last(&curves.hbar_dist))
        .with_info("sigbar_dist_first", first(&curves.sigbar_dist))
        .with_info("sigbar_dist_final", last(&curves.sigbar_dist))
        .with_info("hbar_sigbar_dist_first", first(&curves.hbar_sigbar_dist))
        .with_info("hbar_sigbar_dist_final", last(&curves.hbar_sigbar_dist))
        .with_info("dim", d as f64)
        .with_info("horizon", config.n as f64)
        .with_seed("theta_seed", config.spec.theta_seed)
        .with_seed("stream_seed", config.spec.stream_seed)
        .with_seed("oracle_seed", config.oracle_seed);
    Ok((report, curves))
}
