//! Quadratic strong law and cumulative excess risk.
//!
//! Along a single trajectory with `α + β = 1`, two normalized running sums
//! have almost-sure limits: `(1/log n) Σₖ (θ̂ₖ−θ)(θ̂ₖ−θ)ᵀ → (∇²G(θ))⁻¹`
//! and `(1/log n) Σₖ (G(θ̂ₖ) − G(θ)) → d/2`. Both sums are maintained
//! online; a 10⁵-step trajectory is never stored.
//!
//! Per-iterate excess risk uses the control-variate estimator from the
//! oracle module — the plain test-set estimate carries first-order sampling
//! noise that does not average out when summed along a trajectory.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{gen_stream_replication, gen_theta, SyntheticSpec};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::optim::{run_stream, Algorithm, Cadence, OptimizerState};
use crate::oracle::{synthetic_truth, ExcessRiskEvaluator, UniformFeatures};
use crate::seed::{sub_rng, Purpose};

use super::clt::require_unit_weight_sum;
use super::report::{DiagnosticEntry, DiagnosticReport};

#[derive(Clone, Debug)]
pub struct QslConfig {
    pub algo: Algorithm,
    pub spec: SyntheticSpec,
    pub n: u64,
    pub oracle_seed: u64,
    pub oracle_samples: u64,
    pub eval_seed: u64,
    pub eval_samples: u64,
    pub null_seed: u64,
    pub null_sims: u64,
}

/// Both normalized statistics at a checkpoint.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct QslCheckpoint {
    pub n: u64,
    /// `‖(1/log n) Σ outer − Ĥ⁻¹‖_F / ‖Ĥ⁻¹‖_F`
    pub outer_rel_err: f64,
    /// `(1/log n) Σ excess`
    pub excess_stat: f64,
}

/// Acceptance band for the excess statistic, as multiples of `d/2`.
pub const EXCESS_BAND: (f64, f64) = (0.6, 1.8);

/// Online accumulator for the two running sums.
pub struct QslAccumulator {
    outer_sum: DMatrix<f64>,
    excess_sum: f64,
}

impl QslAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            outer_sum: DMatrix::zeros(dim, dim),
            excess_sum: 0.0,
        }
    }

    pub fn push(&mut self, error: &DVector<f64>, excess: f64) {
        self.outer_sum.ger(1.0, error, error, 1.0);
        self.excess_sum += excess;
    }

    /// Statistics at step `n ≥ 2`.
    pub fn checkpoint(&self, n: u64, hessian_inv: &SymMatrix) -> QslCheckpoint {
        let log_n = (n as f64).ln();
        let outer_rel_err = (&self.outer_sum / log_n - hessian_inv.matrix()).norm()
            / hessian_inv.frobenius_norm();
        QslCheckpoint {
            n,
            outer_rel_err,
            excess_stat: self.excess_sum / log_n,
        }
    }
}

/// How null trajectories for the outer-product statistic are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NullTrajectory {
    /// Independent errors `eₖ ~ N(0, Ĥ⁻¹/k)` — the estimator-noise floor.
    Independent,
    /// Cumulative-average walk `eₖ = (1/k) Σⱼ≤ₖ ζⱼ`, `ζⱼ ~ N(0, Ĥ⁻¹)` iid —
    /// the leading-order law of the optimizer trajectory itself, whose
    /// long-range correlation is what actually drives the statistic's
    /// fluctuation at finite horizons.
    CumulativeAverage,
}

/// Simulate the outer-product statistic under a null trajectory law.
/// Returns (mean, sd) of the relative error over `sims` trajectories.
pub fn null_outer_stats(
    hessian_inv: &SymMatrix,
    n: u64,
    sims: u64,
    seed: u64,
    law: NullTrajectory,
) -> Result<(f64, f64)> {
    if sims < 2 {
        return Err(Error::DiagnosticPrecondition(
            "null calibration needs at least 2 simulations".into(),
        ));
    }
    let l = hessian_inv
        .matrix()
        .clone()
        .cholesky()
        .ok_or(crate::error::Error::NotPositiveDefinite)?
        .l();
    let d = hessian_inv.dim();
    let stats: Vec<f64> = (0..sims)
        .into_par_iter()
        .map(|j| {
            let mut rng = sub_rng(seed, Purpose::NullSim, j);
            let mut outer = DMatrix::<f64>::zeros(d, d);
            let mut walk = DVector::<f64>::zeros(d);
            for k in 1..=n {
                let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                let zeta = &l * z;
                let e = match law {
                    NullTrajectory::Independent => zeta / (k as f64).sqrt(),
                    NullTrajectory::CumulativeAverage => {
                        walk += zeta;
                        &walk / (k as f64)
                    }
                };
                outer.ger(1.0, &e, &e, 1.0);
            }
            let log_n = (n as f64).ln();
            (outer / log_n - hessian_inv.matrix()).norm() / hessian_inv.frobenius_norm()
        })
        .collect();
    let mean = stats.iter().sum::<f64>() / stats.len() as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (stats.len() - 1) as f64;
    Ok((mean, var.sqrt()))
}

/// Run the quadratic-strong-law diagnostic on a single trajectory.
pub fn qsl_diagnostic(config: &QslConfig) -> Result<(DiagnosticReport, Vec<QslCheckpoint>)> {
    require_unit_weight_sum(&config.algo)?;
    if config.n < 10_000 {
        return Err(Error::DiagnosticPrecondition(format!(
            "quadratic strong law needs n >= 10000, got {}",
            config.n
        )));
    }
    let d = config.spec.dim;
    let theta = gen_theta(&config.spec);
    let sampler = UniformFeatures { dim: d };
    let truth = synthetic_truth(&theta, &sampler, config.oracle_seed, config.oracle_samples)?;
    let eval = ExcessRiskEvaluator::synthetic_eval_set(
        &theta,
        &sampler,
        config.eval_seed,
        config.eval_samples,
    );
    let evaluator = ExcessRiskEvaluator::new(&truth, eval)?;

    let checkpoint_cadence =
        Cadence::powers_of_two_with(config.n, &[1_000, 10_000, 100_000, config.n]);
    let mut acc = QslAccumulator::new(d);
    let mut checkpoints: Vec<QslCheckpoint> = Vec::new();
    let mut state = OptimizerState::at_origin(config.algo, d)?;
    run_stream(
        &mut state,
        gen_stream_replication(&config.spec, config.n, 0),
        &Cadence::EveryStep,
        |k, st, _report, _sample| {
            let error = st.theta() - &theta;
            acc.push(&error, evaluator.control_variate(st.theta()));
            if k >= 2 && checkpoint_cadence.hits(k) {
                checkpoints.push(acc.checkpoint(k, &truth.hessian_inv));
            }
            Ok(())
        },
    )?;

    let last = checkpoints
        .last()
        .copied()
        .ok_or_else(|| Error::DiagnosticPrecondition("no checkpoints recorded".into()))?;
    let half_d = d as f64 / 2.0;

    let (null_mean, null_sd) = null_outer_stats(
        &truth.hessian_inv,
        config.n,
        config.null_sims,
        config.null_seed,
        NullTrajectory::CumulativeAverage,
    )?;
    let outer_tol = null_mean + 4.0 * null_sd;

    let mut entries = vec![
        DiagnosticEntry::new("outer_rel_err", last.outer_rel_err, 0.0, outer_tol),
        DiagnosticEntry::band(
            "excess_stat",
            last.excess_stat,
            EXCESS_BAND.0 * half_d,
            EXCESS_BAND.1 * half_d,
        ),
    ];
    // Trend: strictly closer to d/2 at the horizon than at n = 10³.
    let early = checkpoints.iter().find(|c| c.n == 1_000);
    if let Some(early) = early {
        let early_dev = (early.excess_stat - half_d).abs();
        let late_dev = (last.excess_stat - half_d).abs();
        let ratio = if early_dev == 0.0 {
            f64::INFINITY
        } else {
            late_dev / early_dev
        };
        entries.push(DiagnosticEntry::band(
            "excess_trend_ratio",
            ratio,
            0.0,
            1.0 - 1e-9,
        ));
    }

    let mut report = DiagnosticReport::new("qsl", 1, entries)
        .with_info("dim", d as f64)
        .with_info("horizon", config.n as f64)
        .with_info("null_mean", null_mean)
        .with_info("null_sd", null_sd)
        .with_info("eval_samples", config.eval_samples as f64)
        .with_seed("theta_seed", config.spec.theta_seed)
        .with_seed("stream_seed", config.spec.stream_seed)
        .with_seed("oracle_seed", config.oracle_seed)
        .with_seed("eval_seed", config.eval_seed)
        .with_seed("null_seed", config.null_seed);
    for c in &checkpoints {
        if [1_000, 10_000, 100_000, config.n].contains(&c.n) {
            report = report
                .with_info(&format!("excess_stat_at_{}", c.n), c.excess_stat)
                .with_info(&format!("outer_rel_err_at_{}", c.n), c.outer_rel_err);
        }
    }
    Ok((report, checkpoints))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HybridWeights;

    fn hsn(alpha: f64, beta: f64) -> Algorithm {
        Algorithm::Hsn {
            weights: HybridWeights::new(alpha, beta).unwrap(),
        }
    }

    #[test]
    fn preconditions_enforced() {
        let config = QslConfig {
            algo: hsn(0.5, 0.6),
            spec: SyntheticSpec::new(2, 1, 2),
            n: 20_000,
            oracle_seed: 1,
            oracle_samples: 1000,
            eval_seed: 2,
            eval_samples: 100,
            null_seed: 3,
            null_sims: 4,
        };
        assert!(qsl_diagnostic(&config).is_err());
        let mut short = config.clone();
        short.algo = hsn(0.5, 0.5);
        short.n = 100;
        assert!(qsl_diagnostic(&short).is_err());
    }

    #[test]
    fn online_sums_match_stored_recomputation() {
        // Replay a short trajectory and verify the online accumulator
        // against naive sums over the stored iterates.
        let spec = SyntheticSpec::new(3, 41, 42);
        let theta = gen_theta(&spec);
        let sampler = UniformFeatures { dim: 3 };
        let truth = synthetic_truth(&theta, &sampler, 7, 20_000).unwrap();
        let eval = ExcessRiskEvaluator::synthetic_eval_set(&theta, &sampler, 8, 500);
        let evaluator = ExcessRiskEvaluator::new(&truth, eval).unwrap();

        let n = 1000u64;
        let mut acc = QslAccumulator::new(3);
        let mut stored: Vec<DVector<f64>> = Vec::new();
        let mut state = OptimizerState::at_origin(hsn(0.5, 0.5), 3).unwrap();
        run_stream(
            &mut state,
            gen_stream_replication(&spec, n, 0),
            &Cadence::EveryStep,
            |_, st, _, _| {
                acc.push(&(st.theta() - &theta), evaluator.control_variate(st.theta()));
                stored.push(st.theta().clone());
                Ok(())
            },
        )
        .unwrap();

        let mut outer = DMatrix::<f64>::zeros(3, 3);
        let mut excess = 0.0;
        for t in &stored {
            let e = t - &theta;
            outer.ger(1.0, &e, &e, 1.0);
            excess += evaluator.control_variate(t);
        }
        let log_n = (n as f64).ln();
        let online = acc.checkpoint(n, &truth.hessian_inv);
        let naive_outer_err =
            (outer / log_n - truth.hessian_inv.matrix()).norm() / truth.hessian_inv.frobenius_norm();
        let naive_excess = excess / log_n;
        assert!((online.outer_rel_err - naive_outer_err).abs() <= 1e-10 * (1.0 + naive_outer_err));
        assert!((online.excess_stat - naive_excess).abs() <= 1e-10 * (1.0 + naive_excess.abs()));
    }

    #[test]
    fn degenerate_trajectory_at_truth() {
        // θ̂ₖ ≡ θ zeroes the excess statistic and leaves the outer statistic
        // at full relative distance 1 — the documented negative control.
        let theta = DVector::from_vec(vec![1.0, -2.0]);
        let sampler = UniformFeatures { dim: 2 };
        let truth = synthetic_truth(&theta, &sampler, 9, 20_000).unwrap();
        let eval = ExcessRiskEvaluator::synthetic_eval_set(&theta, &sampler, 10, 200);
        let evaluator = ExcessRiskEvaluator::new(&truth, eval).unwrap();
        let mut acc = QslAccumulator::new(2);
        for _ in 0..500 {
            acc.push(&DVector::zeros(2), evaluator.control_variate(&theta));
        }
        let cp = acc.checkpoint(500, &truth.hessian_inv);
        assert_eq!(cp.excess_stat, 0.0);
        assert!((cp.outer_rel_err - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn null_injection_calibrates_small_statistic() {
        // iid N(0, Ĥ⁻¹/k) errors: the normalized outer sum approaches Ĥ⁻¹,
        // so the relative error is modest even at short horizons.
        let h = SymMatrix::from_diagonal(&[0.25, 0.125]);
        let h_inv = crate::linalg::direct_inverse(&h).unwrap();
        let (mean, sd) =
            null_outer_stats(&h_inv, 20_000, 8, 77, NullTrajectory::Independent).unwrap();
        assert!(mean > 0.0 && mean < 0.8, "null mean {mean}");
        assert!(sd < mean, "null sd {sd} vs mean {mean}");

        // the correlated trajectory law fluctuates more than the iid one
        let (corr_mean, corr_sd) =
            null_outer_stats(&h_inv, 20_000, 8, 77, NullTrajectory::CumulativeAverage).unwrap();
        assert!(corr_mean + 4.0 * corr_sd > mean + 4.0 * sd);
    }

}
