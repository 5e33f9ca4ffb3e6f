//! Logistic-regression primitives.
//!
//! Pure scalar/vector functions shared by every optimizer: the logistic
//! link `π`, the per-sample curvature and gradient-variance coefficients
//! `a` and `b`, their hybrid combination `c = α a + β b`, the residual
//! `π(θᵀφ) − y` and the per-sample log loss. All of them are written in
//! overflow-free branch form; the synthetic experiments drive margins far
//! past where naive `exp` saturates.
//!
//! Precondition violations here (non-finite input, mismatched dimensions)
//! are programming errors and panic; recoverable errors live at the
//! optimizer and data layers.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The hybrid weight pair `(α, β)` with `α ≥ 0` and `β > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridWeights {
    alpha: f64,
    beta: f64,
}

impl HybridWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidWeights {
                alpha,
                beta,
                reason: "weights must be finite",
            });
        }
        if alpha < 0.0 {
            return Err(Error::InvalidWeights {
                alpha,
                beta,
                reason: "alpha must be nonnegative",
            });
        }
        if beta <= 0.0 {
            return Err(Error::InvalidWeights {
                alpha,
                beta,
                reason: "beta must be strictly positive",
            });
        }
        Ok(Self { alpha, beta })
    }

    /// The online-Newton-step special case `(0, 1)`.
    pub fn ons() -> Self {
        Self {
            alpha: 0.0,
            beta: 1.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sum(&self) -> f64 {
        self.alpha + self.beta
    }

    /// Whether `α + β = 1` to within `tol` (the hypothesis of the CLT and
    /// quadratic-strong-law results).
    pub fn sums_to_one(&self, tol: f64) -> bool {
        (self.sum() - 1.0).abs() <= tol
    }
}

/// One observation: feature vector and binary label.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    phi: DVector<f64>,
    y: bool,
}

impl Sample {
    pub fn new(phi: DVector<f64>, y: bool) -> Result<Self> {
        if !phi.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "sample features".into(),
            });
        }
        Ok(Self { phi, y })
    }

    pub fn dim(&self) -> usize {
        self.phi.len()
    }

    pub fn phi(&self) -> &DVector<f64> {
        &self.phi
    }

    pub fn y(&self) -> bool {
        self.y
    }

    /// The label as 0.0 or 1.0.
    pub fn label(&self) -> f64 {
        if self.y {
            1.0
        } else {
            0.0
        }
    }
}

/// Overflow-free logistic link `π(x) = eˣ/(1+eˣ)`.
///
/// For `x < 0` evaluates `eˣ/(1+eˣ)` directly; otherwise `1/(1+e⁻ˣ)`. Both
/// branches keep the exponent argument nonpositive, so the function
/// saturates cleanly to 0 and 1 instead of overflowing.
pub fn sigmoid(x: f64) -> f64 {
    assert!(x.is_finite(), "sigmoid: non-finite input {x}");
    if x < 0.0 {
        let e = x.exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

/// Numerically stable `log(1 + eˣ)`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Curvature coefficient `a = π(θᵀφ)(1 − π(θᵀφ)) ∈ [0, 1/4]`.
pub fn coeff_a(theta: &DVector<f64>, phi: &DVector<f64>) -> f64 {
    let p = sigmoid(theta.dot(phi));
    p * (1.0 - p)
}

/// Squared-residual coefficient `b = (π(θᵀφ) − y)² ∈ [0, 1]`.
pub fn coeff_b(theta: &DVector<f64>, sample: &Sample) -> f64 {
    let r = residual(theta, sample);
    r * r
}

/// Hybrid coefficient `c = α a + β b`.
pub fn coeff_c(a: f64, b: f64, weights: &HybridWeights) -> f64 {
    debug_assert!((0.0..=0.25 + 1e-15).contains(&a), "a out of range: {a}");
    debug_assert!((0.0..=1.0 + 1e-15).contains(&b), "b out of range: {b}");
    weights.alpha * a + weights.beta * b
}

/// Gradient residual `π(θᵀφ) − y ∈ [−1, 1]`.
pub fn residual(theta: &DVector<f64>, sample: &Sample) -> f64 {
    sigmoid(theta.dot(sample.phi())) - sample.label()
}

/// Per-sample logistic loss `log(1 + exp(θᵀφ)) − y θᵀφ`.
///
/// Rewritten as `softplus(−m)` for `y = 1` and `softplus(m)` for `y = 0`
/// (with `m = θᵀφ`), which is exact, nonnegative by construction and free
/// of cancellation at large margins.
pub fn loss(theta: &DVector<f64>, sample: &Sample) -> f64 {
    let m = theta.dot(sample.phi());
    if sample.y() {
        softplus(-m)
    } else {
        softplus(m)
    }
}

/// Gradient of [`loss`] with respect to `theta`: `(π(θᵀφ) − y) φ`.
pub fn loss_gradient(theta: &DVector<f64>, sample: &Sample) -> DVector<f64> {
    sample.phi() * residual(theta, sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn sample1(phi: f64, y: bool) -> Sample {
        Sample::new(DVector::from_element(1, phi), y).unwrap()
    }

    #[test]
    fn sigmoid_basics() {
        assert_eq!(sigmoid(0.0), 0.5);
        // symmetry π(x) + π(−x) = 1 within 1 ulp
        let s = sigmoid(3.0) + sigmoid(-3.0);
        assert!((s - 1.0).abs() <= f64::EPSILON);
        // saturation without overflow
        assert_eq!(sigmoid(750.0), 1.0);
        assert_eq!(sigmoid(-750.0), 0.0);
    }

    #[test]
    #[should_panic(expected = "non-finite")]
    fn sigmoid_rejects_nan() {
        sigmoid(f64::NAN);
    }

    #[test]
    fn coeff_a_values() {
        let theta = DVector::from_element(1, 0.0);
        let phi = DVector::from_element(1, 1.0);
        assert_eq!(coeff_a(&theta, &phi), 0.25);

        // scalar oracle at margin 2: π(2)(1−π(2))
        let theta2 = DVector::from_element(1, 2.0);
        assert_relative_eq!(
            coeff_a(&theta2, &phi),
            0.10499358540350652,
            max_relative = 1e-15
        );
    }

    #[test]
    fn coeff_a_sign_symmetry() {
        let mut rng = crate::seed::sub_rng(3, crate::seed::Purpose::Stream, 0);
        use rand::Rng;
        for _ in 0..100 {
            let d = 1 + (rng.random::<u32>() % 5) as usize;
            let theta = DVector::from_fn(d, |_, _| rng.random::<f64>() * 6.0 - 3.0);
            let phi = DVector::from_fn(d, |_, _| rng.random::<f64>());
            assert_relative_eq!(
                coeff_a(&theta, &phi),
                coeff_a(&(-&theta), &phi),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn coeff_b_values() {
        assert_eq!(coeff_b(&DVector::from_element(1, 0.0), &sample1(1.0, true)), 0.25);
        // saturation: y = 1 at margin 750 gives b = 0
        assert_eq!(coeff_b(&DVector::from_element(1, 750.0), &sample1(1.0, true)), 0.0);
        // scalar oracle: margin 2, y = 0 → π(2)²
        assert_relative_eq!(
            coeff_b(&DVector::from_element(1, 2.0), &sample1(1.0, false)),
            0.775803492574376,
            max_relative = 1e-14
        );
    }

    #[test]
    fn coeff_c_values() {
        let ons = HybridWeights::ons();
        assert_eq!(coeff_c(0.2, 0.8, &ons), 0.8);

        let w = HybridWeights::new(0.25, 0.75).unwrap();
        assert_relative_eq!(coeff_c(0.2, 0.2, &w), 0.2, max_relative = 1e-15);

        // every tabulated weight setting is accepted verbatim
        for (alpha, beta) in [
            (1e-10, 1.0 - 1e-10),
            (1e-10, 1.0 - 1e-10),
            (0.25, 0.75),
            (0.9, 0.1),
        ] {
            let w = HybridWeights::new(alpha, beta).unwrap();
            assert_eq!(w.alpha(), alpha);
            assert_eq!(w.beta(), beta);
            assert!(w.sums_to_one(1e-12));
        }
    }

    #[test]
    fn weights_validation() {
        assert!(HybridWeights::new(-0.1, 1.0).is_err());
        assert!(HybridWeights::new(0.1, 0.0).is_err());
        assert!(HybridWeights::new(f64::NAN, 1.0).is_err());
        assert!(HybridWeights::new(0.0, 1.0).is_ok());
    }

    #[test]
    fn residual_values() {
        let zero = DVector::from_element(1, 0.0);
        assert_eq!(residual(&zero, &sample1(1.0, true)), -0.5);
        assert_eq!(residual(&zero, &sample1(1.0, false)), 0.5);
        // scalar oracle: margin 2, y = 1 → π(2) − 1
        assert_relative_eq!(
            residual(&DVector::from_element(1, 2.0), &sample1(1.0, true)),
            -0.11920292202211756,
            max_relative = 1e-14
        );
    }

    #[test]
    fn loss_values() {
        let zero = DVector::from_element(1, 0.0);
        assert_relative_eq!(
            loss(&zero, &sample1(1.0, true)),
            std::f64::consts::LN_2,
            max_relative = 1e-15
        );
        // softplus saturation: m = 750, y = 1 → exactly 0 without overflow
        assert_eq!(loss(&DVector::from_element(1, 750.0), &sample1(1.0, true)), 0.0);
        // scalar oracle: m = −3, y = 0 → log(1 + e⁻³)
        assert_relative_eq!(
            loss(&DVector::from_element(1, -3.0), &sample1(1.0, false)),
            0.04858735157374206,
            max_relative = 1e-14
        );
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        use rand::Rng;
        let mut rng = crate::seed::sub_rng(4, crate::seed::Purpose::Stream, 0);
        for _ in 0..50 {
            let d = 3;
            let theta = DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let phi = DVector::from_fn(d, |_, _| rng.random::<f64>());
            let y = rng.random::<f64>() < 0.5;
            let sample = Sample::new(phi, y).unwrap();
            let grad = loss_gradient(&theta, &sample);
            let h = 1e-6;
            for i in 0..d {
                let mut plus = theta.clone();
                let mut minus = theta.clone();
                plus[i] += h;
                minus[i] -= h;
                let fd = (loss(&plus, &sample) - loss(&minus, &sample)) / (2.0 * h);
                assert_relative_eq!(grad[i], fd, max_relative = 1e-5, epsilon = 1e-9);
            }
        }
    }
}
