//! Ground-truth quantities for the diagnostics.
//!
//! Two provenances. Synthetic runs know the true parameter, so the Hessian
//! `∇²G(θ) = E[π(θᵀΦ)(1−π(θᵀΦ)) ΦΦᵀ]` and the optimal loss are estimated by
//! seeded Monte Carlo. Real datasets have no true parameter; the reference
//! is the batch empirical minimizer found by damped Newton iteration, and
//! excess risk is measured against it.
//!
//! Monte-Carlo estimators split their sample budget over a fixed number of
//! shards whose partial sums are combined in shard order, so results do not
//! depend on how many worker threads happen to run.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{condition_estimate, direct_inverse, SymMatrix};
use crate::model::{coeff_a, loss, residual, sigmoid, Sample};
use crate::seed::{sub_rng, Purpose, SeedRng};

/// Fixed shard count for Monte-Carlo estimation. Changing this constant
/// changes results; changing the worker count never does.
pub const MC_SHARDS: u64 = 64;

/// Feature distribution the oracle integrates against.
pub trait FeatureSampler: Sync {
    fn dim(&self) -> usize;
    fn draw(&self, rng: &mut SeedRng) -> DVector<f64>;
}

/// iid `U[0,1]` coordinates — the synthetic-protocol feature law.
#[derive(Clone, Copy, Debug)]
pub struct UniformFeatures {
    pub dim: usize,
}

impl FeatureSampler for UniformFeatures {
    fn dim(&self) -> usize {
        self.dim
    }

    fn draw(&self, rng: &mut SeedRng) -> DVector<f64> {
        use rand::Rng;
        DVector::from_fn(self.dim, |_, _| rng.random::<f64>())
    }
}

/// Degenerate sampler returning a fixed vector; test instrumentation.
#[derive(Clone, Debug)]
pub struct ConstantFeatures {
    pub phi: DVector<f64>,
}

impl FeatureSampler for ConstantFeatures {
    fn dim(&self) -> usize {
        self.phi.len()
    }

    fn draw(&self, _rng: &mut SeedRng) -> DVector<f64> {
        self.phi.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    SyntheticKnownTheta,
    BatchNewtonFit,
}

/// Reference quantities every diagnostic compares against.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub theta_star: DVector<f64>,
    pub hessian: SymMatrix,
    pub hessian_inv: SymMatrix,
    /// Estimate of the objective value at `theta_star`.
    pub g_at_star: f64,
    pub provenance: Provenance,
    /// Monte-Carlo draws (synthetic) or dataset rows (batch fit) behind the
    /// estimates.
    pub mc_samples: u64,
}

impl GroundTruth {
    fn validated(self) -> Result<Self> {
        if !self.hessian.is_positive_definite() {
            return Err(Error::NotPositiveDefinite);
        }
        let d = self.hessian.dim();
        let product = self.hessian.matrix() * self.hessian_inv.matrix();
        let id = DMatrix::<f64>::identity(d, d);
        let err = (product - id).amax();
        if err > 1e-6 {
            return Err(Error::InvalidConfig(format!(
                "hessian inverse check failed: max deviation {err:e}"
            )));
        }
        Ok(self)
    }
}

fn shard_sizes(m: u64) -> Vec<u64> {
    let q = m / MC_SHARDS;
    let r = m % MC_SHARDS;
    (0..MC_SHARDS)
        .map(|s| q + u64::from(s < r))
        .collect()
}

/// Monte-Carlo estimate of the Hessian `E[a(θ, Φ) ΦΦᵀ]` with
/// `a = π(θᵀΦ)(1 − π(θᵀΦ))`. Deterministic per seed.
pub fn estimate_hessian_mc(
    theta: &DVector<f64>,
    sampler: &dyn FeatureSampler,
    seed: u64,
    m: u64,
) -> Result<SymMatrix> {
    mc_weighted_outer(theta, sampler, seed, m, |_rng, _p, a| a)
}

/// Monte-Carlo estimate of `Σ(θ) = E[(π(θᵀΦ) − Y)² ΦΦᵀ]`, drawing the label
/// from its conditional Bernoulli law.
pub fn estimate_sigma_mc(
    theta: &DVector<f64>,
    sampler: &dyn FeatureSampler,
    seed: u64,
    m: u64,
) -> Result<SymMatrix> {
    mc_weighted_outer(theta, sampler, seed, m, |rng, p, _a| {
        use rand::Rng;
        let y = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
        let r = p - y;
        r * r
    })
}

fn mc_weighted_outer(
    theta: &DVector<f64>,
    sampler: &dyn FeatureSampler,
    seed: u64,
    m: u64,
    weight: impl Fn(&mut SeedRng, f64, f64) -> f64 + Sync,
) -> Result<SymMatrix> {
    if m == 0 {
        return Err(Error::Empty { what: "Monte-Carlo sample budget" });
    }
    if sampler.dim() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: sampler.dim(),
        });
    }
    let d = theta.len();
    let sizes = shard_sizes(m);
    let partials: Vec<DMatrix<f64>> = sizes
        .par_iter()
        .enumerate()
        .map(|(shard, &count)| {
            let mut rng = sub_rng(seed, Purpose::OracleShard, shard as u64);
            let mut acc = DMatrix::<f64>::zeros(d, d);
            for _ in 0..count {
                let phi = sampler.draw(&mut rng);
                let p = sigmoid(theta.dot(&phi));
                let a = p * (1.0 - p);
                let w = weight(&mut rng, p, a);
                acc.ger(w, &phi, &phi, 1.0);
            }
            acc
        })
        .collect();
    let mut total = DMatrix::<f64>::zeros(d, d);
    for partial in partials {
        total += partial;
    }
    SymMatrix::from_matrix(total / m as f64)
}

/// Monte-Carlo estimate of `G(θ_eval)` when labels follow the logistic
/// model at `theta_truth`.
pub fn estimate_g_mc(
    theta_eval: &DVector<f64>,
    theta_truth: &DVector<f64>,
    sampler: &dyn FeatureSampler,
    seed: u64,
    m: u64,
) -> Result<f64> {
    use rand::Rng;
    if m == 0 {
        return Err(Error::Empty { what: "Monte-Carlo sample budget" });
    }
    let sizes = shard_sizes(m);
    let partials: Vec<f64> = sizes
        .par_iter()
        .enumerate()
        .map(|(shard, &count)| {
            let mut rng = sub_rng(seed, Purpose::OracleShard, shard as u64);
            let mut acc = 0.0;
            for _ in 0..count {
                let phi = sampler.draw(&mut rng);
                let p = sigmoid(theta_truth.dot(&phi));
                let y = rng.random::<f64>() < p;
                let sample = Sample::new(phi, y).expect("finite draw");
                acc += loss(theta_eval, &sample);
            }
            acc
        })
        .collect();
    Ok(partials.iter().sum::<f64>() / m as f64)
}

/// Ground truth for a synthetic run at known `theta`.
pub fn synthetic_truth(
    theta: &DVector<f64>,
    sampler: &dyn FeatureSampler,
    seed: u64,
    m: u64,
) -> Result<GroundTruth> {
    let hessian = estimate_hessian_mc(theta, sampler, seed, m)?;
    let hessian_inv = direct_inverse(&hessian)?;
    let g_at_star = estimate_g_mc(theta, theta, sampler, seed, m)?;
    GroundTruth {
        theta_star: theta.clone(),
        hessian,
        hessian_inv,
        g_at_star,
        provenance: Provenance::SyntheticKnownTheta,
        mc_samples: m,
    }
    .validated()
}

pub const NEWTON_DEFAULT_TOL: f64 = 1e-10;
pub const NEWTON_DEFAULT_MAX_ITER: usize = 100;
const NEWTON_MAX_HALVINGS: usize = 50;

/// Mean loss, mean gradient and mean curvature matrix of a dataset at `theta`,
/// accumulated over fixed index shards so the result is worker-independent.
fn empirical_derivatives(
    dataset: &[Sample],
    theta: &DVector<f64>,
) -> (f64, DVector<f64>, SymMatrix) {
    let d = theta.len();
    let n = dataset.len();
    let shard = n.div_ceil(MC_SHARDS as usize).max(1);
    let partials: Vec<(f64, DVector<f64>, DMatrix<f64>)> = dataset
        .par_chunks(shard)
        .map(|chunk| {
            let mut loss_acc = 0.0;
            let mut grad = DVector::<f64>::zeros(d);
            let mut hess = DMatrix::<f64>::zeros(d, d);
            for sample in chunk {
                loss_acc += loss(theta, sample);
                grad.axpy(residual(theta, sample), sample.phi(), 1.0);
                hess.ger(coeff_a(theta, sample.phi()), sample.phi(), sample.phi(), 1.0);
            }
            (loss_acc, grad, hess)
        })
        .collect();
    let mut loss_acc = 0.0;
    let mut grad = DVector::<f64>::zeros(d);
    let mut hess = DMatrix::<f64>::zeros(d, d);
    for (l, g, h) in partials {
        loss_acc += l;
        grad += g;
        hess += h;
    }
    let scale = 1.0 / n as f64;
    (
        loss_acc * scale,
        grad * scale,
        SymMatrix::from_matrix(hess * scale).expect("outer-product sum is symmetric"),
    )
}

fn empirical_loss(dataset: &[Sample], theta: &DVector<f64>) -> f64 {
    let shard = dataset.len().div_ceil(MC_SHARDS as usize).max(1);
    let partials: Vec<f64> = dataset
        .par_chunks(shard)
        .map(|chunk| chunk.iter().map(|s| loss(theta, s)).sum::<f64>())
        .collect();
    partials.iter().sum::<f64>() / dataset.len() as f64
}

/// Damped Newton on the empirical logistic loss.
///
/// Full Newton steps with step-halving until the loss decreases; stops when
/// the gradient norm falls below `tol`. Perfect separation shows up as a
/// singular empirical Hessian and is reported as such.
pub fn batch_newton_fit(dataset: &[Sample], tol: f64, max_iter: usize) -> Result<GroundTruth> {
    if dataset.is_empty() {
        return Err(Error::Empty { what: "dataset" });
    }
    let d = dataset[0].dim();
    let mut theta = DVector::<f64>::zeros(d);
    let (mut value, mut grad, mut hess) = empirical_derivatives(dataset, &theta);

    for _ in 0..max_iter {
        if grad.norm() <= tol {
            let hessian_inv = direct_inverse(&hess).map_err(|e| match e {
                Error::Singular { cond, cap } => Error::Singular { cond, cap },
                other => other,
            })?;
            return GroundTruth {
                theta_star: theta,
                hessian: hess,
                hessian_inv,
                g_at_star: value,
                provenance: Provenance::BatchNewtonFit,
                mc_samples: dataset.len() as u64,
            }
            .validated();
        }
        let chol = hess.matrix().clone().cholesky().ok_or_else(|| Error::Singular {
            cond: condition_estimate(&hess),
            cap: crate::linalg::DEFAULT_CONDITION_CAP,
        })?;
        let direction = chol.solve(&grad);
        let mut t = 1.0;
        let mut improved = false;
        let mut full_step_value = f64::INFINITY;
        for halving in 0..=NEWTON_MAX_HALVINGS {
            let candidate = &theta - &direction * t;
            let candidate_value = empirical_loss(dataset, &candidate);
            if halving == 0 {
                full_step_value = candidate_value;
            }
            if candidate_value < value {
                theta = candidate;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            // Close to the minimizer the per-step decrement drops below
            // what the loss can resolve in f64. Take the full Newton step
            // when it is flat to machine noise; the quadratic phase then
            // drives the gradient to its floor. Anything else is a genuine
            // stall.
            let noise = 8.0 * f64::EPSILON * value.abs().max(1.0);
            if full_step_value <= value + noise {
                theta -= &direction;
            } else {
                return Err(Error::NoConvergence {
                    max_iter,
                    grad_norm: grad.norm(),
                });
            }
        }
        let (v, g, h) = empirical_derivatives(dataset, &theta);
        value = v;
        grad = g;
        hess = h;
    }
    if grad.norm() <= tol {
        let hessian_inv = direct_inverse(&hess)?;
        return GroundTruth {
            theta_star: theta,
            hessian: hess,
            hessian_inv,
            g_at_star: value,
            provenance: Provenance::BatchNewtonFit,
            mc_samples: dataset.len() as u64,
        }
        .validated();
    }
    Err(Error::NoConvergence {
        max_iter,
        grad_norm: grad.norm(),
    })
}

/// Excess risk of `theta` against the reference minimizer on a common
/// evaluation set: difference of the two mean losses, reported as-is (it
/// may be slightly negative by sampling noise).
pub fn excess_risk(theta: &DVector<f64>, truth: &GroundTruth, eval: &[Sample]) -> Result<f64> {
    if eval.is_empty() {
        return Err(Error::Empty { what: "evaluation set" });
    }
    if theta.len() != truth.theta_star.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.theta_star.len(),
            got: theta.len(),
        });
    }
    let mut at_theta = 0.0;
    let mut at_star = 0.0;
    for sample in eval {
        at_theta += loss(theta, sample);
        at_star += loss(&truth.theta_star, sample);
    }
    Ok((at_theta - at_star) / eval.len() as f64)
}

/// Reusable excess-risk evaluator over a fixed evaluation set.
///
/// Precomputes the reference loss and the empirical gradient at the
/// reference point. [`ExcessRiskEvaluator::control_variate`] subtracts the
/// first-order term `ḡᵀ(θ − θ*)`; since the population gradient vanishes at
/// the optimum this leaves the estimate unbiased while removing the
/// dominant sampling noise — essential when summing excess risk over 10⁵
/// iterates.
pub struct ExcessRiskEvaluator {
    eval: Vec<Sample>,
    theta_star: DVector<f64>,
    mean_loss_at_star: f64,
    mean_grad_at_star: DVector<f64>,
}

impl ExcessRiskEvaluator {
    pub fn new(truth: &GroundTruth, eval: Vec<Sample>) -> Result<Self> {
        if eval.is_empty() {
            return Err(Error::Empty { what: "evaluation set" });
        }
        let d = truth.theta_star.len();
        if eval.iter().any(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: eval.iter().map(Sample::dim).find(|&k| k != d).unwrap_or(d),
            });
        }
        let mut grad_sum = DVector::<f64>::zeros(d);
        for sample in &eval {
            grad_sum.axpy(residual(&truth.theta_star, sample), sample.phi(), 1.0);
        }
        // computed exactly like `plain` computes its mean, so the excess at
        // the reference point is exactly zero
        let mean_loss_at_star = eval
            .iter()
            .map(|s| loss(&truth.theta_star, s))
            .sum::<f64>()
            / eval.len() as f64;
        let mean_grad_at_star = grad_sum / eval.len() as f64;
        Ok(Self {
            eval,
            theta_star: truth.theta_star.clone(),
            mean_loss_at_star,
            mean_grad_at_star,
        })
    }

    pub fn eval_len(&self) -> usize {
        self.eval.len()
    }

    /// Plain difference of mean losses.
    pub fn plain(&self, theta: &DVector<f64>) -> f64 {
        let mean: f64 = self.eval.iter().map(|s| loss(theta, s)).sum::<f64>()
            / self.eval.len() as f64;
        mean - self.mean_loss_at_star
    }

    /// Variance-reduced estimate: plain excess minus `ḡᵀ(θ − θ*)`.
    pub fn control_variate(&self, theta: &DVector<f64>) -> f64 {
        let first_order = self.mean_grad_at_star.dot(&(theta - &self.theta_star));
        self.plain(theta) - first_order
    }

    /// Draw a fixed evaluation set from the synthetic model.
    pub fn synthetic_eval_set(
        theta: &DVector<f64>,
        sampler: &dyn FeatureSampler,
        seed: u64,
        m: u64,
    ) -> Vec<Sample> {
        use rand::Rng;
        let mut rng = sub_rng(seed, Purpose::EvalSet, 0);
        (0..m)
            .map(|_| {
                let phi = sampler.draw(&mut rng);
                let p = sigmoid(theta.dot(&phi));
                let y = rng.random::<f64>() < p;
                Sample::new(phi, y).expect("finite draw")
            })
            .collect()
    }
}
