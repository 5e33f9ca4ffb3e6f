//! Central-limit-theorem diagnostic.
//!
//! Under `α + β = 1` the scaled error `√n (θ̂ₙ − θ)` is asymptotically
//! centered Gaussian with covariance `(∇²G(θ))⁻¹`. The diagnostic runs R
//! independent replications, compares the empirical second moment of the
//! scaled errors against the oracle inverse Hessian, and checks that the
//! mean Mahalanobis statistic `n (θ̂−θ)ᵀ Ĥ (θ̂−θ)` sits at its chi-squared
//! mean `d`.
//!
//! The covariance tolerance is not an invented constant: it is calibrated
//! by simulating the limit law itself (draws from `N(0, Ĥ⁻¹)` pushed
//! through the identical estimator) and allowing six standard deviations
//! around the null mean.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::{gen_stream_replication, gen_theta, SyntheticSpec};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::optim::{Algorithm, OptimizerState};
use crate::oracle::{synthetic_truth, ExcessRiskEvaluator, UniformFeatures};
use crate::seed::{sub_rng, Purpose};

use super::report::{DiagnosticEntry, DiagnosticReport};

/// Tolerance on `α + β = 1` for the theorem hypotheses.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct CltConfig {
    pub algo: Algorithm,
    pub spec: SyntheticSpec,
    /// Horizon per replication.
    pub n: u64,
    pub replications: u64,
    pub oracle_seed: u64,
    pub oracle_samples: u64,
    pub eval_seed: u64,
    pub eval_samples: u64,
    pub null_seed: u64,
    pub null_sims: u64,
}

/// Reject algorithms outside the theorem hypotheses (`α + β = 1`, `β > 0`,
/// hybrid family only).
pub fn require_unit_weight_sum(algo: &Algorithm) -> Result<()> {
    match algo.hybrid_weights() {
        Some(w) if w.sums_to_one(WEIGHT_SUM_TOL) => Ok(()),
        Some(w) => Err(Error::DiagnosticPrecondition(format!(
            "asymptotic-law diagnostics require alpha + beta = 1; got {} + {} = {}",
            w.alpha(),
            w.beta(),
            w.sum()
        ))),
        None => Err(Error::DiagnosticPrecondition(format!(
            "asymptotic-law diagnostics apply to the hybrid family, not {}",
            algo.tag()
        ))),
    }
}

/// Uncentered empirical second moment `(1/R) Σ xᵣ xᵣᵀ`; the limit law has
/// known mean zero, and the null calibration uses the same estimator.
fn second_moment(errors: &[DVector<f64>]) -> DMatrix<f64> {
    let d = errors[0].len();
    let mut acc = DMatrix::<f64>::zeros(d, d);
    for x in errors {
        acc.ger(1.0, x, x, 1.0);
    }
    acc / errors.len() as f64
}

fn covariance_rel_err(errors: &[DVector<f64>], target: &SymMatrix) -> f64 {
    let c = second_moment(errors);
    (c - target.matrix()).norm() / target.frobenius_norm()
}

/// Kolmogorov–Smirnov distance between a sample and the χ²(d) CDF.
fn ks_distance_chi2(values: &[f64], dof: f64) -> f64 {
    let chi2 = ChiSquared::new(dof).expect("positive dof");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = chi2.cdf(x.max(0.0));
            let lo = (cdf - i as f64 / n).abs();
            let hi = ((i + 1) as f64 / n - cdf).abs();
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Simulate the limit law: each null replication set draws R vectors from
/// `N(0, Ĥ⁻¹)` and evaluates the identical covariance statistic. Returns
/// (mean, standard deviation) over `sims` sets.
pub fn null_covariance_stats(
    hessian_inv: &SymMatrix,
    replications: u64,
    sims: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if sims < 2 {
        return Err(Error::DiagnosticPrecondition(
            "null calibration needs at least 2 simulations".into(),
        ));
    }
    let chol = hessian_inv
        .matrix()
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let d = hessian_inv.dim();
    let stats: Vec<f64> = (0..sims)
        .into_par_iter()
        .map(|j| {
            let mut rng = sub_rng(seed, Purpose::NullSim, j);
            let draws: Vec<DVector<f64>> = (0..replications)
                .map(|_| {
                    let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                    &l * z
                })
                .collect();
            covariance_rel_err(&draws, hessian_inv)
        })
        .collect();
    let mean = stats.iter().sum::<f64>() / stats.len() as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (stats.len() - 1) as f64;
    Ok((mean, var.sqrt()))
}

/// Run the CLT diagnostic.
pub fn clt_diagnostic(config: &CltConfig) -> Result<DiagnosticReport> {
    require_unit_weight_sum(&config.algo)?;
    if config.replications < 100 {
        return Err(Error::DiagnosticPrecondition(format!(
            "CLT diagnostic needs at least 100 replications, got {}",
            config.replications
        )));
    }
    let d = config.spec.dim;
    let theta = gen_theta(&config.spec);
    let sampler = UniformFeatures { dim: d };
    let truth = synthetic_truth(&theta, &sampler, config.oracle_seed, config.oracle_samples)?;

    let finals: Vec<DVector<f64>> = (0..config.replications)
        .into_par_iter()
        .map(|r| -> Result<DVector<f64>> {
            let mut state = OptimizerState::at_origin(config.algo, d)?;
            for sample in gen_stream_replication(&config.spec, config.n, r) {
                state.step(&sample).map_err(|e| Error::ReplicationFailed {
                    replication: r,
                    source: Box::new(e),
                })?;
            }
            Ok(state.theta().clone())
        })
        .collect::<Result<_>>()?;

    let sqrt_n = (config.n as f64).sqrt();
    let scaled: Vec<DVector<f64>> = finals.iter().map(|t| (t - &theta) * sqrt_n).collect();

    let cov_rel_err = covariance_rel_err(&scaled, &truth.hessian_inv);
    let (null_mean, null_sd) = null_covariance_stats(
        &truth.hessian_inv,
        config.replications,
        config.null_sims,
        config.null_seed,
    )?;
    let cov_tol = null_mean + 6.0 * null_sd;

    let mahalanobis: Vec<f64> = scaled
        .iter()
        .map(|x| truth.hessian.quadratic_form(x))
        .collect();
    let maha_mean = mahalanobis.iter().sum::<f64>() / mahalanobis.len() as f64;
    let maha_tol = 4.0 * (2.0 * d as f64 / config.replications as f64).sqrt();

    // Informational only: distributional distance of the chi-squared limits.
    let ks_maha = ks_distance_chi2(&mahalanobis, d as f64);
    let eval = ExcessRiskEvaluator::synthetic_eval_set(
        &theta,
        &sampler,
        config.eval_seed,
        config.eval_samples,
    );
    let evaluator = ExcessRiskEvaluator::new(&truth, eval)?;
    let scaled_excess: Vec<f64> = finals
        .iter()
        .map(|t| 2.0 * config.n as f64 * evaluator.control_variate(t))
        .collect();
    let ks_excess = ks_distance_chi2(&scaled_excess, d as f64);

    let entries = vec![
        DiagnosticEntry::new("covariance_rel_err", cov_rel_err, 0.0, cov_tol),
        DiagnosticEntry::new("mahalanobis_mean", maha_mean, d as f64, maha_tol),
    ];
    Ok(DiagnosticReport::new("clt", config.replications, entries)
        .with_info("null_mean", null_mean)
        .with_info("null_sd", null_sd)
        .with_info("ks_mahalanobis_chi2", ks_maha)
        .with_info("ks_scaled_excess_chi2", ks_excess)
        .with_info("horizon", config.n as f64)
        .with_info("dim", d as f64)
        .with_seed("theta_seed", config.spec.theta_seed)
        .with_seed("stream_seed", config.spec.stream_seed)
        .with_seed("oracle_seed", config.oracle_seed)
        .with_seed("eval_seed", config.eval_seed)
        .with_seed("null_seed", config.null_seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::direct_inverse;
    use crate::model::HybridWeights;

    #[test]
    fn weight_validation() {
        let ok = Algorithm::Hsn {
            weights: HybridWeights::new(0.5, 0.5).unwrap(),
        };
        assert!(require_unit_weight_sum(&ok).is_ok());
        assert!(require_unit_weight_sum(&Algorithm::Ons).is_ok());

        let bad = Algorithm::Hsn {
            weights: HybridWeights::new(0.5, 0.6).unwrap(),
        };
        assert!(require_unit_weight_sum(&bad).is_err());
        assert!(require_unit_weight_sum(&Algorithm::Sn).is_err());
    }

    #[test]
    fn null_statistic_obeys_heuristic_bound() {
        // drawing straight from the limit law: the covariance statistic
        // stays below 3·√(d(d+1)/R)
        let d = 3usize;
        let r = 500u64;
        let h = SymMatrix::from_diagonal(&[0.2, 0.05, 0.6]);
        let h_inv = direct_inverse(&h).unwrap();
        let chol = h_inv.matrix().clone().cholesky().unwrap();
        let l = chol.l();
        let bound = 3.0 * ((d * (d + 1)) as f64 / r as f64).sqrt();
        for sim in 0..20 {
            let mut rng = sub_rng(900, Purpose::NullSim, sim);
            let draws: Vec<DVector<f64>> = (0..r)
                .map(|_| {
                    let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                    &l * z
                })
                .collect();
            let stat = covariance_rel_err(&draws, &h_inv);
            assert!(stat <= bound, "null statistic {stat} above {bound}");
        }
    }

    #[test]
    fn null_mahalanobis_mean_is_d() {
        let d = 3usize;
        let r = 2000u64;
        let h = SymMatrix::from_diagonal(&[0.25, 0.1, 0.4]);
        let h_inv = direct_inverse(&h).unwrap();
        let l = h_inv.matrix().clone().cholesky().unwrap().l();
        let mut rng = sub_rng(901, Purpose::NullSim, 0);
        let mean: f64 = (0..r)
            .map(|_| {
                let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                let x = &l * z;
                h.quadratic_form(&x)
            })
            .sum::<f64>()
            / r as f64;
        let tol = 4.0 * (2.0 * d as f64 / r as f64).sqrt();
        assert!((mean - d as f64).abs() <= tol, "mean {mean}");
    }

    #[test]
    fn scalar_target_covariance() {
        // d = 1, Φ ≡ 1, θ = 0: Hessian 1/4, CLT covariance target 4.
        let sampler = crate::oracle::ConstantFeatures {
            phi: DVector::from_element(1, 1.0),
        };
        let truth = synthetic_truth(&DVector::zeros(1), &sampler, 3, 1000).unwrap();
        assert!((truth.hessian_inv.matrix()[(0, 0)] - 4.0).abs() <= 1e-12);
    }

    #[test]
    fn rejects_small_replication_budgets_and_bad_weights() {
        let config = CltConfig {
            algo: Algorithm::Hsn {
                weights: HybridWeights::new(0.3, 0.6).unwrap(),
            },
            spec: SyntheticSpec::new(2, 1, 2),
            n: 100,
            replications: 200,
            oracle_seed: 1,
            oracle_samples: 1000,
            eval_seed: 2,
            eval_samples: 100,
            null_seed: 3,
            null_sims: 10,
        };
        assert!(clt_diagnostic(&config).is_err());

        let mut small = config.clone();
        small.algo = Algorithm::Ons;
        small.replications = 10;
        assert!(clt_diagnostic(&small).is_err());
    }
}
