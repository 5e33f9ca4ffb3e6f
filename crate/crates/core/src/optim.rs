//! Streaming optimizer state machines.
//!
//! Five algorithms consume one [`Sample`] per step:
//!
//! - `HSN`: hybrid stochastic Newton with per-sample curvature weight
//!   `c = α a + β b`;
//! - `ONS`: the online Newton step, identical to HSN with `(α, β) = (0, 1)`
//!   and routed through the same code path so the equivalence is bitwise;
//! - `SN`: stochastic Newton, `c = a`;
//! - `TSN`: truncated stochastic Newton, `c = max(a, ν₀ n^{−γ})`;
//! - `SGD`: stochastic gradient descent with step `scale / n`.
//!
//! Second-order steps follow one fixed ordering: the maintained inverse
//! `Sₙ⁻¹` is advanced through the rank-1 update first, and the iterate is
//! then moved with the freshly updated matrix:
//!
//! ```text
//! θ̂ₙ₊₁ = θ̂ₙ − Sₙ₊₁⁻¹ φₙ₊₁ (π(θ̂ₙᵀφₙ₊₁) − yₙ₊₁)
//! ```
//!
//! Any NaN/Inf in the state aborts the run with the offending step index.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{smw_update, SymMatrix};
use crate::model::{coeff_a, coeff_b, coeff_c, residual, HybridWeights, Sample};

/// Lower-clamp schedule for TSN: floor `νₙ = ν₀ · n^{−γ}` applied to the
/// curvature weight at step `n` (1-based).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationSchedule {
    floor_scale: f64,
    exponent: f64,
}

pub const DEFAULT_TSN_FLOOR_SCALE: f64 = 1.0;
pub const DEFAULT_TSN_EXPONENT: f64 = 0.49;

impl TruncationSchedule {
    pub fn new(floor_scale: f64, exponent: f64) -> Result<Self> {
        if !(floor_scale.is_finite() && floor_scale > 0.0) {
            return Err(Error::InvalidSchedule(format!(
                "floor scale must be positive, got {floor_scale}"
            )));
        }
        if !(exponent.is_finite() && exponent > 0.0 && exponent <= 0.5) {
            return Err(Error::InvalidSchedule(format!(
                "exponent must lie in (0, 1/2], got {exponent}"
            )));
        }
        Ok(Self {
            floor_scale,
            exponent,
        })
    }

    pub fn floor_scale(&self) -> f64 {
        self.floor_scale
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    /// `νₙ` for the 1-based step index `n`; positive and nonincreasing.
    pub fn floor_at(&self, n: u64) -> f64 {
        debug_assert!(n >= 1);
        self.floor_scale * (n as f64).powf(-self.exponent)
    }
}

impl Default for TruncationSchedule {
    fn default() -> Self {
        Self {
            floor_scale: DEFAULT_TSN_FLOOR_SCALE,
            exponent: DEFAULT_TSN_EXPONENT,
        }
    }
}

/// Which algorithm a state machine runs, with its per-algorithm extras.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Algorithm {
    Hsn { weights: HybridWeights },
    Ons,
    Sn,
    Tsn { schedule: TruncationSchedule },
    Sgd { step_scale: f64 },
}

impl Algorithm {
    pub fn tag(&self) -> &'static str {
        match self {
            Algorithm::Hsn { .. } => "HSN",
            Algorithm::Ons => "ONS",
            Algorithm::Sn => "SN",
            Algorithm::Tsn { .. } => "TSN",
            Algorithm::Sgd { .. } => "SGD",
        }
    }

    pub fn is_second_order(&self) -> bool {
        !matches!(self, Algorithm::Sgd { .. })
    }

    /// Asymptotic scale of the averaged curvature matrix: `α + β` for HSN,
    /// 1 for the baselines whose weight tends to the curvature coefficient.
    pub fn curvature_scale(&self) -> f64 {
        match self {
            Algorithm::Hsn { weights } => weights.sum(),
            _ => 1.0,
        }
    }

    /// Hybrid weights when the algorithm has them (HSN explicitly, ONS by
    /// definition).
    pub fn hybrid_weights(&self) -> Option<HybridWeights> {
        match self {
            Algorithm::Hsn { weights } => Some(*weights),
            Algorithm::Ons => Some(HybridWeights::ons()),
            _ => None,
        }
    }
}

/// Per-step scalars exposed to metric hooks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    /// `g = c φᵀ Sₙ⁻¹ φ` (0 for SGD).
    pub g: f64,
    pub a: f64,
    pub b: f64,
    /// The weight actually applied to the rank-1 update (0 for SGD).
    pub c: f64,
    pub residual: f64,
    pub theta_delta_norm: f64,
}

/// The streaming state: current iterate, maintained inverse (second-order
/// algorithms only) and step counter.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    algo: Algorithm,
    theta: DVector<f64>,
    s_inv: Option<SymMatrix>,
    n: u64,
}

impl OptimizerState {
    /// Fresh state at `theta0` with `S₀⁻¹ = I` for second-order variants.
    pub fn new(algo: Algorithm, theta0: DVector<f64>) -> Result<Self> {
        if theta0.is_empty() {
            return Err(Error::Empty { what: "theta0" });
        }
        if !theta0.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "theta0".into(),
            });
        }
        if let Algorithm::Sgd { step_scale } = algo {
            if !(step_scale.is_finite() && step_scale > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "SGD step scale must be positive, got {step_scale}"
                )));
            }
        }
        let s_inv = algo
            .is_second_order()
            .then(|| SymMatrix::identity(theta0.len()));
        Ok(Self {
            algo,
            theta: theta0,
            s_inv,
            n: 0,
        })
    }

    /// State at the origin of `R^dim`.
    pub fn at_origin(algo: Algorithm, dim: usize) -> Result<Self> {
        Self::new(algo, DVector::zeros(dim))
    }

    pub fn algorithm(&self) -> &Algorithm {
        &self.algo
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn s_inv(&self) -> Option<&SymMatrix> {
        self.s_inv.as_ref()
    }

    /// Number of samples consumed so far.
    pub fn step_count(&self) -> u64 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    /// Consume one sample.
    pub fn step(&mut self, sample: &Sample) -> Result<StepReport> {
        let step_index = self.n + 1;
        if sample.dim() != self.theta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta.len(),
                got: sample.dim(),
            }
            .at_step(step_index));
        }
        let algo = self.algo;
        let report = match algo {
            Algorithm::Hsn { weights } => self.second_order_step(sample, CoeffRule::Hybrid(weights)),
            Algorithm::Ons => {
                self.second_order_step(sample, CoeffRule::Hybrid(HybridWeights::ons()))
            }
            Algorithm::Sn => self.second_order_step(sample, CoeffRule::Curvature),
            Algorithm::Tsn { schedule } => {
                self.second_order_step(sample, CoeffRule::Truncated(schedule))
            }
            Algorithm::Sgd { step_scale } => self.sgd_step(sample, step_scale),
        }
        .map_err(|e| e.at_step(step_index))?;

        self.n += 1;
        self.check_finite(report)
    }

    fn second_order_step(&mut self, sample: &Sample, rule: CoeffRule) -> Result<StepReport> {
        let phi = sample.phi();
        let a = coeff_a(&self.theta, phi);
        let b = coeff_b(&self.theta, sample);
        let c = match rule {
            CoeffRule::Hybrid(weights) => coeff_c(a, b, &weights),
            CoeffRule::Curvature => a,
            CoeffRule::Truncated(schedule) => a.max(schedule.floor_at(self.n + 1)),
        };
        let r = residual(&self.theta, sample);

        // The inverse moves first; the iterate then uses Sₙ₊₁⁻¹.
        let s_inv = self.s_inv.as_ref().expect("second-order state has s_inv");
        let (updated, g) = smw_update(s_inv, phi, c)?;
        let delta = updated.mul_vec(phi) * r;
        self.theta -= &delta;
        self.s_inv = Some(updated);

        Ok(StepReport {
            g,
            a,
            b,
            c,
            residual: r,
            theta_delta_norm: delta.norm(),
        })
    }

    fn sgd_step(&mut self, sample: &Sample, step_scale: f64) -> Result<StepReport> {
        let phi = sample.phi();
        let a = coeff_a(&self.theta, phi);
        let b = coeff_b(&self.theta, sample);
        let r = residual(&self.theta, sample);
        let step = step_scale / (self.n + 1) as f64;
        let delta = phi * (step * r);
        self.theta -= &delta;
        Ok(StepReport {
            g: 0.0,
            a,
            b,
            c: 0.0,
            residual: r,
            theta_delta_norm: delta.norm(),
        })
    }

    fn check_finite(&self, report: StepReport) -> Result<StepReport> {
        if !self.theta.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteState {
                step: self.n,
                context: "iterate".into(),
            });
        }
        let scalars = [
            report.g,
            report.a,
            report.b,
            report.c,
            report.residual,
            report.theta_delta_norm,
        ];
        if !scalars.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteState {
                step: self.n,
                context: "step report".into(),
            });
        }
        Ok(report)
    }
}

#[derive(Clone, Copy)]
enum CoeffRule {
    Hybrid(HybridWeights),
    Curvature,
    Truncated(TruncationSchedule),
}

/// When metric hooks fire during [`run_stream`].
#[derive(Clone, Debug, PartialEq)]
pub enum Cadence {
    /// Powers of two, plus the final step.
    PowersOfTwo,
    /// Every step.
    EveryStep,
    /// An explicit sorted list of step indices, plus the final step.
    Explicit(Vec<u64>),
}

impl Cadence {
    pub fn hits(&self, n: u64) -> bool {
        match self {
            Cadence::PowersOfTwo => n.is_power_of_two(),
            Cadence::EveryStep => true,
            Cadence::Explicit(points) => points.binary_search(&n).is_ok(),
        }
    }

    /// Powers of two up to `n` merged with `extra`, deduplicated — handy
    /// for diagnostics that must checkpoint at exact decades.
    pub fn powers_of_two_with(n: u64, extra: &[u64]) -> Cadence {
        let mut points: Vec<u64> = (0..64)
            .map(|k| 1u64 << k)
            .take_while(|&p| p <= n)
            .collect();
        points.extend(extra.iter().copied().filter(|&p| p >= 1 && p <= n));
        points.sort_unstable();
        points.dedup();
        Cadence::Explicit(points)
    }
}

/// Drive `state` over `samples`, invoking `hook` at every cadence point and
/// at the final step. The hook sees the 1-based step index, the state after
/// the step, the step report and the sample that produced it.
///
/// Deterministic: identical initial state and sample sequence produce a
/// bit-identical final state. Step errors carry their iteration index.
pub fn run_stream<I, F>(
    state: &mut OptimizerState,
    samples: I,
    cadence: &Cadence,
    mut hook: F,
) -> Result<()>
where
    I: IntoIterator<Item = Sample>,
    F: FnMut(u64, &OptimizerState, &StepReport, &Sample) -> Result<()>,
{
    let mut last: Option<(StepReport, Sample)> = None;
    for sample in samples {
        let report = state.step(&sample)?;
        let n = state.step_count();
        if cadence.hits(n) {
            hook(n, state, &report, &sample)?;
            last = None;
        } else {
            last = Some((report, sample));
        }
    }
    if let Some((report, sample)) = last {
        hook(state.step_count(), state, &report, &sample)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_stream, SyntheticSpec};
    use crate::linalg::{direct_inverse, rank1_accumulate};
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn sample1(phi: f64, y: bool) -> Sample {
        Sample::new(DVector::from_element(1, phi), y).unwrap()
    }

    fn hsn(alpha: f64, beta: f64) -> Algorithm {
        Algorithm::Hsn {
            weights: HybridWeights::new(alpha, beta).unwrap(),
        }
    }

    #[test]
    fn hsn_worked_example_d1() {
        // θ̂₀ = 0, S₀⁻¹ = [1], φ = [1], y = 1, α = β = 0.5:
        // a = b = c = 0.25, g = 0.25, S₁⁻¹ = [0.8], θ̂₁ = 0.4.
        let mut state = OptimizerState::at_origin(hsn(0.5, 0.5), 1).unwrap();
        let report = state.step(&sample1(1.0, true)).unwrap();
        assert_relative_eq!(report.a, 0.25, max_relative = 1e-15);
        assert_relative_eq!(report.b, 0.25, max_relative = 1e-15);
        assert_relative_eq!(report.c, 0.25, max_relative = 1e-15);
        assert_relative_eq!(report.g, 0.25, max_relative = 1e-15);
        assert_relative_eq!(state.s_inv().unwrap().matrix()[(0, 0)], 0.8, max_relative = 1e-15);
        assert_relative_eq!(state.theta()[0], 0.4, max_relative = 1e-15);
        // cross-check: S₁ = S₀ + cφφᵀ = 1.25, direct inversion agrees
        assert_relative_eq!(state.s_inv().unwrap().matrix()[(0, 0)], 1.0 / 1.25, max_relative = 1e-15);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn zero_phi_is_a_noop_step() {
        let mut state = OptimizerState::at_origin(hsn(0.5, 0.5), 3).unwrap();
        let sample = Sample::new(DVector::zeros(3), true).unwrap();
        let report = state.step(&sample).unwrap();
        assert_eq!(report.g, 0.0);
        assert_eq!(report.theta_delta_norm, 0.0);
        assert_eq!(state.theta(), &DVector::zeros(3));
        assert_eq!(state.s_inv().unwrap().matrix(), SymMatrix::identity(3).matrix());
    }

    #[test]
    fn random_step_matches_direct_inversion() {
        let spec = SyntheticSpec::new(5, 101, 202);
        let mut state = OptimizerState::at_origin(hsn(0.4, 0.6), 5).unwrap();
        let mut s_accum = SymMatrix::identity(5);
        for sample in gen_stream(&spec, 40) {
            let report = state.step(&sample).unwrap();
            s_accum = rank1_accumulate(&s_accum, sample.phi(), report.c).unwrap();
            let direct = direct_inverse(&s_accum).unwrap();
            let rel = state.s_inv().unwrap().frobenius_distance(&direct) / direct.frobenius_norm();
            assert!(rel <= 1e-9, "relative error {rel}");
        }
    }

    #[test]
    fn ons_is_hsn_zero_one_bitwise() {
        let spec = SyntheticSpec::new(4, 7, 8);
        let mut ons = OptimizerState::at_origin(Algorithm::Ons, 4).unwrap();
        let mut hsn01 = OptimizerState::at_origin(hsn(0.0, 1.0), 4).unwrap();
        for sample in gen_stream(&spec, 500) {
            let ra = ons.step(&sample).unwrap();
            let rb = hsn01.step(&sample).unwrap();
            assert_eq!(ra, rb);
        }
        assert_eq!(ons.theta(), hsn01.theta());
        assert_eq!(ons.s_inv().unwrap().matrix(), hsn01.s_inv().unwrap().matrix());
    }

    #[test]
    fn sn_worked_example_and_small_c() {
        // margin 0 makes a = b, so SN coincides with the HSN example.
        let mut state = OptimizerState::at_origin(Algorithm::Sn, 1).unwrap();
        let report = state.step(&sample1(1.0, true)).unwrap();
        assert_relative_eq!(report.c, 0.25, max_relative = 1e-15);
        assert_relative_eq!(state.s_inv().unwrap().matrix()[(0, 0)], 0.8, max_relative = 1e-15);
        assert_relative_eq!(state.theta()[0], 0.4, max_relative = 1e-15);

        // saturated margin: a → 0, the inverse barely moves
        let mut far = OptimizerState::new(Algorithm::Sn, DVector::from_element(1, 40.0)).unwrap();
        let before = far.s_inv().unwrap().matrix()[(0, 0)];
        let report = far.step(&sample1(1.0, true)).unwrap();
        assert!(report.c < 1e-15);
        assert!((far.s_inv().unwrap().matrix()[(0, 0)] - before).abs() < 1e-15);
    }

    #[test]
    fn tsn_clamp_schedule() {
        let schedule = TruncationSchedule::new(1.0, 0.49).unwrap();
        // clamp inactive
        assert_eq!(0.25_f64.max(schedule.floor_at(10_000)), 0.25);
        // clamp active at n = 100 with a ≈ 0: c = 100^{−0.49}
        assert_relative_eq!(
            1e-9_f64.max(schedule.floor_at(100)),
            0.10471285480508995,
            max_relative = 1e-14
        );
    }

    #[test]
    fn tsn_equals_sn_when_clamp_never_binds() {
        // a ≥ some floor along the whole stream ⇒ identical trajectories.
        // ν₀ tiny keeps νₙ below any attainable a.
        let schedule = TruncationSchedule::new(1e-12, 0.49).unwrap();
        let spec = SyntheticSpec::new(3, 21, 22);
        let mut sn = OptimizerState::at_origin(Algorithm::Sn, 3).unwrap();
        let mut tsn = OptimizerState::at_origin(Algorithm::Tsn { schedule }, 3).unwrap();
        for sample in gen_stream(&spec, 300) {
            let ra = sn.step(&sample).unwrap();
            let rb = tsn.step(&sample).unwrap();
            assert_eq!(ra, rb, "clamp unexpectedly active");
        }
        assert_eq!(sn.theta(), tsn.theta());
    }

    #[test]
    fn sgd_step_basics() {
        let mut state = OptimizerState::at_origin(Algorithm::Sgd { step_scale: 1.0 }, 1).unwrap();
        let report = state.step(&sample1(1.0, true)).unwrap();
        assert_relative_eq!(state.theta()[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(report.theta_delta_norm, 0.5, max_relative = 1e-15);
        assert_eq!(report.g, 0.0);

        // step magnitude is ‖φ‖·|residual|·scale/n exactly
        let r2 = state.step(&sample1(2.0, false)).unwrap();
        assert_relative_eq!(
            r2.theta_delta_norm,
            2.0 * r2.residual.abs() / 2.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn sgd_saturated_residual_is_noop() {
        let mut state =
            OptimizerState::new(Algorithm::Sgd { step_scale: 1.0 }, DVector::from_element(1, 750.0))
                .unwrap();
        let report = state.step(&sample1(1.0, true)).unwrap();
        assert_eq!(report.residual, 0.0);
        assert_eq!(state.theta()[0], 750.0);
    }

    #[test]
    fn dimension_mismatch_reports_step_index() {
        let mut state = OptimizerState::at_origin(hsn(0.5, 0.5), 2).unwrap();
        let bad = Sample::new(DVector::zeros(3), false).unwrap();
        match state.step(&bad) {
            Err(Error::StepFailed { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected StepFailed, got {other:?}"),
        }
    }

    #[test]
    fn run_stream_empty_source_returns_initial() {
        let mut state = OptimizerState::at_origin(hsn(0.5, 0.5), 2).unwrap();
        run_stream(&mut state, Vec::new(), &Cadence::PowersOfTwo, |_, _, _, _| Ok(()))
            .unwrap();
        assert_eq!(state.step_count(), 0);
        assert_eq!(state.theta(), &DVector::zeros(2));
    }

    #[test]
    fn run_stream_is_deterministic() {
        let spec = SyntheticSpec::new(4, 5, 6);
        let run = || {
            let mut state = OptimizerState::at_origin(hsn(0.3, 0.7), 4).unwrap();
            run_stream(&mut state, gen_stream(&spec, 1000), &Cadence::PowersOfTwo, |_, _, _, _| {
                Ok(())
            })
            .unwrap();
            state
        };
        let a = run();
        let b = run();
        assert_eq!(a.theta(), b.theta());
        assert_eq!(a.s_inv().unwrap().matrix(), b.s_inv().unwrap().matrix());
    }

    #[test]
    fn run_stream_cadence_hits_powers_of_two_and_final() {
        let spec = SyntheticSpec::new(2, 1, 2);
        let mut seen = Vec::new();
        let mut state = OptimizerState::at_origin(hsn(0.5, 0.5), 2).unwrap();
        run_stream(&mut state, gen_stream(&spec, 20), &Cadence::PowersOfTwo, |n, _, _, _| {
            seen.push(n);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![1, 2, 4, 8, 16, 20]);
    }

    #[test]
    fn replay_reconstruction_matches_inverse_path() {
        // Rebuild Sₙ from recorded weights and compare against inverting
        // the maintained Sₙ⁻¹ at the end of a 1000-step stream.
        let spec = SyntheticSpec::new(5, 33, 44);
        let mut state = OptimizerState::at_origin(hsn(0.5, 0.5), 5).unwrap();
        let mut recorded: Vec<(f64, DVector<f64>)> = Vec::new();
        run_stream(&mut state, gen_stream(&spec, 1000), &Cadence::EveryStep, |_, _, rep, smp| {
            recorded.push((rep.c, smp.phi().clone()));
            Ok(())
        })
        .unwrap();
        let mut s = SymMatrix::identity(5);
        for (c, phi) in &recorded {
            s = rank1_accumulate(&s, phi, *c).unwrap();
        }
        let direct = direct_inverse(&s).unwrap();
        let rel = state.s_inv().unwrap().frobenius_distance(&direct) / direct.frobenius_norm();
        assert!(rel <= 1e-8, "relative error {rel}");
    }

    #[test]
    fn shift_relation_holds_along_trajectory() {
        let spec = SyntheticSpec::new(4, 55, 66);
        let mut state = OptimizerState::at_origin(hsn(0.5, 0.5), 4).unwrap();
        for sample in gen_stream(&spec, 300) {
            let before = state.s_inv().unwrap().clone();
            let report = state.step(&sample).unwrap();
            let lhs = state.s_inv().unwrap().mul_vec(sample.phi());
            let rhs = before.mul_vec(sample.phi()) / (1.0 + report.g);
            for i in 0..4 {
                assert!(
                    (lhs[i] - rhs[i]).abs() <= 1e-12 * (1.0 + rhs[i].abs()),
                    "shift relation violated: {} vs {}",
                    lhs[i],
                    rhs[i]
                );
            }
        }
    }

    #[test]
    fn s_inv_eigenvalues_stay_in_unit_interval() {
        let spec = SyntheticSpec::new(5, 77, 88);
        let mut state = OptimizerState::at_origin(hsn(0.5, 0.5), 5).unwrap();
        for (i, sample) in gen_stream(&spec, 2000).enumerate() {
            state.step(&sample).unwrap();
            if (i + 1) % 250 == 0 {
                let eigs = state.s_inv().unwrap().eigenvalues();
                for &lambda in eigs.iter() {
                    assert!(lambda > 0.0 && lambda <= 1.0 + 1e-12, "eigenvalue {lambda}");
                }
            }
        }
    }

    #[test]
    fn alpha_split_invariant_on_margin_zero_stream() {
        // Orthogonal-basis feeds keep every margin exactly zero, so a = b
        // and any (α, 1−α) split yields the same trajectory bitwise.
        let d = 6;
        let splits = [0.0, 0.25, 0.3, 0.9];
        let mut finals: Vec<DVector<f64>> = Vec::new();
        for &alpha in &splits {
            let algo = hsn(alpha, 1.0 - alpha);
            let mut state = OptimizerState::at_origin(algo, d).unwrap();
            for k in 0..d {
                let mut phi = DVector::zeros(d);
                phi[k] = 1.0;
                let sample = Sample::new(phi, k % 2 == 0).unwrap();
                let report = state.step(&sample).unwrap();
                assert_eq!(report.a, report.b);
                assert_eq!(report.c, 0.25);
            }
            finals.push(state.theta().clone());
        }
        for other in &finals[1..] {
            assert_eq!(&finals[0], other);
        }
    }

    #[test]
    fn sbar_reconstruction_over_long_stream() {
        // (1/n)(Σ cₖφₖφₖᵀ + I) agrees with inverting the maintained
        // Sₙ⁻¹ and dividing by n, to 1e-8 relative.
        let spec = SyntheticSpec::new(8, 91, 92);
        let n = 10_000u64;
        let mut state = OptimizerState::at_origin(hsn(0.5, 0.5), 8).unwrap();
        let mut s = SymMatrix::identity(8);
        run_stream(&mut state, gen_stream(&spec, n), &Cadence::EveryStep, |_, _, rep, smp| {
            s = rank1_accumulate(&s, smp.phi(), rep.c).unwrap();
            Ok(())
        })
        .unwrap();
        let sbar_from_weights = s.scale(1.0 / n as f64);
        let sbar_from_inverse = direct_inverse(state.s_inv().unwrap())
            .unwrap()
            .scale(1.0 / n as f64);
        let rel = sbar_from_weights.frobenius_distance(&sbar_from_inverse)
            / sbar_from_inverse.frobenius_norm();
        assert!(rel <= 1e-8, "relative error {rel}");
    }
}
