//! Dense symmetric-matrix kernel.
//!
//! The streaming optimizers maintain the inverse of a curvature matrix
//! through rank-1 Sherman–Morrison–Woodbury updates ([`smw_update`]); the
//! direct Cholesky inversion ([`direct_inverse`]) exists as an independent
//! oracle for tests and for the batch Newton reference fit. Everything is
//! dense `f64`: the target dimensions are a few hundred at most.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Condition-estimate cap above which [`direct_inverse`] refuses to invert.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

/// Relative tolerance for the symmetry invariant of [`SymMatrix`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A square symmetric matrix with finite entries.
///
/// Construction and every public operation re-establish symmetry exactly
/// (via `(M + Mᵀ)/2` where the arithmetic itself does not already
/// guarantee it), so downstream code can rely on `m[(i, j)] == m[(j, i)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    pub fn identity(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            m: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "dimension must be positive");
        Self {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            m: DMatrix::from_diagonal(&DVector::from_row_slice(diag)),
        }
    }

    /// Validate a dense matrix as symmetric-to-tolerance and wrap it,
    /// symmetrizing the tiny floating-point residue away.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if m.is_empty() {
            return Err(Error::Empty { what: "matrix" });
        }
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite {
                context: "matrix entries".into(),
            });
        }
        let scale = 1.0 + m.amax();
        let max_asym = (0..m.nrows())
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| (m[(i, j)] - m[(j, i)]).abs())
            .fold(0.0_f64, f64::max);
        if max_asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric { max_asym });
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(m: DMatrix<f64>) -> Self {
        let sym = (&m + m.transpose()) * 0.5;
        Self { m: sym }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn frobenius_distance(&self, other: &SymMatrix) -> f64 {
        (&self.m - &other.m).norm()
    }

    /// `M v`.
    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.m * v
    }

    /// `vᵀ M v`.
    pub fn quadratic_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.m * v))
    }

    pub fn scale(&self, factor: f64) -> SymMatrix {
        SymMatrix {
            m: &self.m * factor,
        }
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix {
            m: &self.m + &other.m,
        }
    }

    /// Eigenvalues of the matrix (symmetric solver), unsorted.
    pub fn eigenvalues(&self) -> DVector<f64> {
        self.m.symmetric_eigenvalues()
    }

    /// Whether a Cholesky factorization succeeds.
    pub fn is_positive_definite(&self) -> bool {
        self.m.clone().cholesky().is_some()
    }
}

/// Rank-1 Sherman–Morrison–Woodbury update of a maintained inverse.
///
/// Given `s_inv = S⁻¹` (symmetric positive definite), a direction `phi` and
/// a nonnegative weight `c`, returns `(S + c φφᵀ)⁻¹` together with the
/// scalar `g = c φᵀ S⁻¹ φ`:
///
/// ```text
/// (S + c φφᵀ)⁻¹ = S⁻¹ − c (1 + g)⁻¹ (S⁻¹φ)(S⁻¹φ)ᵀ
/// ```
///
/// The result is explicitly symmetrized; over 10⁵-step streams the raw
/// recursion accumulates asymmetric rounding residue.
pub fn smw_update(s_inv: &SymMatrix, phi: &DVector<f64>, c: f64) -> Result<(SymMatrix, f64)> {
    if phi.len() != s_inv.dim() {
        return Err(Error::DimensionMismatch {
            expected: s_inv.dim(),
            got: phi.len(),
        });
    }
    if !phi.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite {
            context: "smw_update: phi".into(),
        });
    }
    if !c.is_finite() {
        return Err(Error::NonFinite {
            context: "smw_update: c".into(),
        });
    }
    if c < 0.0 {
        return Err(Error::NegativeWeight { c });
    }

    let u = s_inv.mul_vec(phi);
    let g = c * phi.dot(&u);
    if g < 0.0 {
        // c ≥ 0, so a negative quadratic form means s_inv lost definiteness.
        return Err(Error::NotPositiveDefinite);
    }
    let mut out = s_inv.m.clone();
    // ger: out ← out − c(1+g)⁻¹ u uᵀ
    out.ger(-c / (1.0 + g), &u, &u, 1.0);
    Ok((SymMatrix::symmetrized(out), g))
}

/// Direct inversion of a symmetric positive definite matrix via Cholesky,
/// guarded by an eigenvalue-ratio condition estimate.
pub fn direct_inverse(m: &SymMatrix) -> Result<SymMatrix> {
    direct_inverse_with_cap(m, DEFAULT_CONDITION_CAP)
}

pub fn direct_inverse_with_cap(m: &SymMatrix, condition_cap: f64) -> Result<SymMatrix> {
    let cond = condition_estimate(m);
    if !cond.is_finite() || cond > condition_cap {
        return Err(Error::Singular {
            cond,
            cap: condition_cap,
        });
    }
    let chol = m
        .m
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?;
    Ok(SymMatrix::symmetrized(chol.inverse()))
}

/// max |λ| / min |λ| from the symmetric eigenvalue solver. Infinite when the
/// smallest eigenvalue is exactly zero.
pub fn condition_estimate(m: &SymMatrix) -> f64 {
    let eigs = m.eigenvalues();
    let max = eigs.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()));
    let min = eigs
        .iter()
        .fold(f64::INFINITY, |acc, &x| acc.min(x.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `m + w φφᵀ`. The outer product is symmetric by construction, so no
/// re-symmetrization is needed.
pub fn rank1_accumulate(m: &SymMatrix, phi: &DVector<f64>, w: f64) -> Result<SymMatrix> {
    if phi.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: phi.len(),
        });
    }
    let mut out = m.m.clone();
    out.ger(w, phi, phi, 1.0);
    Ok(SymMatrix { m: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{sub_rng, Purpose};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn random_vector(rng: &mut impl Rng, d: usize) -> DVector<f64> {
        DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    }

    /// Random SPD matrix A Aᵀ + d·I.
    pub(crate) fn random_spd(rng: &mut impl Rng, d: usize) -> SymMatrix {
        let a = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let spd = &a * a.transpose() + DMatrix::identity(d, d) * (d as f64);
        SymMatrix::from_matrix(spd).unwrap()
    }

    #[test]
    fn smw_scalar_case() {
        let s_inv = SymMatrix::identity(1);
        let phi = DVector::from_element(1, 1.0);
        let (updated, g) = smw_update(&s_inv, &phi, 1.0).unwrap();
        // (1 + 1·1·1)⁻¹ = 0.5 by direct scalar inversion
        assert_relative_eq!(updated.matrix()[(0, 0)], 0.5, max_relative = 1e-15);
        assert_relative_eq!(g, 1.0, max_relative = 1e-15);
    }

    #[test]
    fn smw_zero_phi_is_identity_op() {
        let mut rng = sub_rng(11, Purpose::Stream, 0);
        let s_inv = random_spd(&mut rng, 4);
        let phi = DVector::zeros(4);
        let (updated, g) = smw_update(&s_inv, &phi, 3.7).unwrap();
        assert_eq!(g, 0.0);
        assert_eq!(updated.matrix(), s_inv.matrix());
    }

    #[test]
    fn smw_matches_direct_inverse_d5() {
        let mut rng = sub_rng(12, Purpose::Stream, 0);
        let s = random_spd(&mut rng, 5);
        let s_inv = direct_inverse(&s).unwrap();
        let phi = random_vector(&mut rng, 5);
        let c = 0.7;
        let (via_smw, _) = smw_update(&s_inv, &phi, c).unwrap();
        let direct = direct_inverse(&rank1_accumulate(&s, &phi, c).unwrap()).unwrap();
        let rel = via_smw.frobenius_distance(&direct) / direct.frobenius_norm();
        assert!(rel <= 1e-10, "relative error {rel}");
    }

    #[test]
    fn smw_rejects_bad_inputs() {
        let s_inv = SymMatrix::identity(3);
        let phi2 = DVector::zeros(2);
        let phi3 = DVector::from_vec(vec![1.0, f64::NAN, 0.0]);
        let ok = DVector::zeros(3);
        assert!(matches!(
            smw_update(&s_inv, &phi2, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            smw_update(&s_inv, &phi3, 1.0),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            smw_update(&s_inv, &ok, -0.1),
            Err(Error::NegativeWeight { .. })
        ));
    }

    #[test]
    fn direct_inverse_identity_and_diagonal() {
        let id = SymMatrix::identity(6);
        let inv = direct_inverse(&id).unwrap();
        assert_eq!(inv.matrix(), id.matrix());

        let diag = SymMatrix::from_diagonal(&[2.0, 4.0]);
        let inv = direct_inverse(&diag).unwrap();
        assert_relative_eq!(inv.matrix()[(0, 0)], 0.5, max_relative = 1e-15);
        assert_relative_eq!(inv.matrix()[(1, 1)], 0.25, max_relative = 1e-15);
    }

    #[test]
    fn direct_inverse_multiply_back_d8() {
        let mut rng = sub_rng(13, Purpose::Stream, 0);
        let m = random_spd(&mut rng, 8);
        let inv = direct_inverse(&m).unwrap();
        let prod = m.matrix() * inv.matrix();
        let id = DMatrix::<f64>::identity(8, 8);
        for i in 0..8 {
            for j in 0..8 {
                assert!(
                    (prod[(i, j)] - id[(i, j)]).abs() <= 1e-8,
                    "entry ({i},{j}) off by {}",
                    (prod[(i, j)] - id[(i, j)]).abs()
                );
            }
        }
    }

    #[test]
    fn direct_inverse_reports_singular_with_condition() {
        let nearly_singular =
            SymMatrix::from_diagonal(&[1.0, 1e-14]);
        match direct_inverse(&nearly_singular) {
            Err(Error::Singular { cond, cap }) => {
                assert!(cond > cap);
            }
            other => panic!("expected Singular, got {other:?}"),
        }
    }

    #[test]
    fn rank1_basic_cases() {
        let zero = SymMatrix::zeros(2);
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let m = rank1_accumulate(&zero, &e1, 1.0).unwrap();
        assert_eq!(m.matrix()[(0, 0)], 1.0);
        assert_eq!(m.matrix()[(0, 1)], 0.0);
        assert_eq!(m.matrix()[(1, 1)], 0.0);

        let mut rng = sub_rng(14, Purpose::Stream, 0);
        let base = random_spd(&mut rng, 3);
        let same = rank1_accumulate(&base, &random_vector(&mut rng, 3), 0.0).unwrap();
        assert_eq!(same.matrix(), base.matrix());
    }

    #[test]
    fn rank1_elementwise() {
        let mut rng = sub_rng(15, Purpose::Stream, 0);
        let m = random_spd(&mut rng, 4);
        let phi = random_vector(&mut rng, 4);
        let w = -0.3;
        let out = rank1_accumulate(&m, &phi, w).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(
                    out.matrix()[(i, j)],
                    m.matrix()[(i, j)] + w * phi[i] * phi[j],
                    max_relative = 1e-14
                );
            }
        }
    }

    #[test]
    fn from_matrix_rejects_asymmetry() {
        let mut m = DMatrix::identity(3, 3);
        m[(0, 1)] = 1e-3;
        assert!(matches!(
            SymMatrix::from_matrix(m),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn shift_relation_on_random_updates() {
        // (S + cφφᵀ)⁻¹ φ = (1+g)⁻¹ S⁻¹ φ, per-entry to 1e-12.
        let mut rng = sub_rng(16, Purpose::Stream, 0);
        for trial in 0..200 {
            let d = 1 + (trial % 8);
            let s = random_spd(&mut rng, d);
            let s_inv = direct_inverse(&s).unwrap();
            let phi = random_vector(&mut rng, d);
            let c = rng.random::<f64>();
            let (updated, g) = smw_update(&s_inv, &phi, c).unwrap();
            let lhs = updated.mul_vec(&phi);
            let rhs = s_inv.mul_vec(&phi) / (1.0 + g);
            for i in 0..d {
                assert!(
                    (lhs[i] - rhs[i]).abs() <= 1e-12 * (1.0 + rhs[i].abs()),
                    "entry {i}: {} vs {}",
                    lhs[i],
                    rhs[i]
                );
            }
        }
    }

    #[test]
    fn trace_recursion_on_random_updates() {
        // Tr[(S + cφφᵀ)⁻¹] = Tr[S⁻¹] − c(1+g)⁻¹ φᵀS⁻²φ, to 1e-10.
        let mut rng = sub_rng(17, Purpose::Stream, 0);
        for trial in 0..200 {
            let d = 1 + (trial % 8);
            let s = random_spd(&mut rng, d);
            let s_inv = direct_inverse(&s).unwrap();
            let phi = random_vector(&mut rng, d);
            let c = rng.random::<f64>();
            let (updated, g) = smw_update(&s_inv, &phi, c).unwrap();
            let s_inv_phi = s_inv.mul_vec(&phi);
            let phi_s2_phi = s_inv_phi.dot(&s_inv_phi);
            let expected = s_inv.trace() - c / (1.0 + g) * phi_s2_phi;
            assert!(
                (updated.trace() - expected).abs() <= 1e-10 * (1.0 + expected.abs()),
                "trace {} vs {}",
                updated.trace(),
                expected
            );
        }
    }

    #[test]
    fn positive_definiteness_preserved() {
        let mut rng = sub_rng(18, Purpose::Stream, 0);
        for _ in 0..50 {
            let d = 2 + (rng.random::<u32>() % 6) as usize;
            let mut inv = SymMatrix::identity(d);
            for _ in 0..50 {
                let phi = random_vector(&mut rng, d);
                let c = rng.random::<f64>() * 0.5;
                inv = smw_update(&inv, &phi, c).unwrap().0;
            }
            assert!(inv.is_positive_definite());
        }
    }

    #[test]
    fn eigenvalues_stay_below_one_from_identity() {
        // S₀ = I and nonnegative weights keep every eigenvalue of S⁻¹ ≤ 1.
        let mut rng = sub_rng(19, Purpose::Stream, 0);
        let d = 6;
        let mut inv = SymMatrix::identity(d);
        for _ in 0..500 {
            let phi = random_vector(&mut rng, d);
            let c = rng.random::<f64>() * 0.3;
            inv = smw_update(&inv, &phi, c).unwrap().0;
        }
        let max_eig = inv.eigenvalues().iter().fold(f64::MIN, |a, &x| a.max(x));
        assert!(max_eig <= 1.0 + 1e-12, "max eigenvalue {max_eig}");
        let min_eig = inv.eigenvalues().iter().fold(f64::MAX, |a, &x| a.min(x));
        assert!(min_eig > 0.0, "min eigenvalue {min_eig}");
    }
}
