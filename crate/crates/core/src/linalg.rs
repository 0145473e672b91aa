//! Dense complex state vectors and square matrices.
//!
//! Qubit ordering: qubit 0 is the most significant bit of the basis index.
//! `kron(a, b)` places `a` on the most significant block, so joining an angle
//! qubit as `angle ⊗ data` puts it at position 0.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type Amplitude = Complex64;

/// Largest register (angle qubit included) the dense representation accepts.
pub const MAX_QUBITS: usize = 12;

/// Tolerance for comparing states.
pub const STATE_TOL: f64 = 1e-10;
/// Tolerance for matrix predicates (unitarity, self-inverseness).
pub const MATRIX_TOL: f64 = 1e-10;
/// Allowed drift of Σ|amp|² away from 1.
pub const NORM_TOL: f64 = 1e-12;
/// Accepted drift for externally supplied states before renormalizing.
pub const INPUT_NORM_TOL: f64 = 1e-9;

const ZERO: Amplitude = Complex64::new(0.0, 0.0);
const ONE: Amplitude = Complex64::new(1.0, 0.0);

fn log2_exact(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

fn check_finite(values: &[Amplitude]) -> Result<()> {
    match values
        .iter()
        .find(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        Some(z) => Err(Error::NonFinite(z.to_string())),
        None => Ok(()),
    }
}

/// Normalized pure state over `num_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Amplitude>,
}

impl StateVector {
    /// Builds a state from amplitudes. The squared norm must be within
    /// [`INPUT_NORM_TOL`] of one; the stored vector is renormalized exactly.
    pub fn new(amps: Vec<Amplitude>) -> Result<Self> {
        let num_qubits = log2_exact(amps.len())?;
        if num_qubits == 0 {
            return Err(Error::NotPowerOfTwo(1));
        }
        if num_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits(num_qubits));
        }
        check_finite(&amps)?;
        let norm_sqr = norm_sqr(&amps);
        if (norm_sqr - 1.0).abs() > INPUT_NORM_TOL {
            return Err(Error::NotNormalized(norm_sqr));
        }
        Ok(Self::from_unnormalized(amps, norm_sqr))
    }

    pub(crate) fn from_unnormalized(mut amps: Vec<Amplitude>, norm_sqr: f64) -> Self {
        let num_qubits = amps.len().trailing_zeros() as usize;
        let scale = 1.0 / norm_sqr.sqrt();
        amps.iter_mut().for_each(|a| *a *= scale);
        Self { num_qubits, amps }
    }

    /// Reorders amplitudes so that entry `i` is taken from `source(i)`. A
    /// permutation keeps the norm, so no rescaling happens.
    pub(crate) fn permuted(&self, source: impl Fn(usize) -> usize) -> Self {
        Self {
            num_qubits: self.num_qubits,
            amps: (0..self.amps.len()).map(|i| self.amps[source(i)]).collect(),
        }
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::NotPowerOfTwo(1));
        }
        if num_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits(num_qubits));
        }
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: index,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { num_qubits, amps })
    }

    /// Haar-ish random state: independent Gaussian real and imaginary parts, normalized.
    pub fn random<R: Rng + ?Sized>(num_qubits: usize, rng: &mut R) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::NotPowerOfTwo(1));
        }
        if num_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits(num_qubits));
        }
        let amps: Vec<Amplitude> = (0..1usize << num_qubits)
            .map(|_| Complex64::new(gaussian(rng), gaussian(rng)))
            .collect();
        let n = norm_sqr(&amps);
        Ok(Self::from_unnormalized(amps, n))
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    /// `self ⊗ other`, with `self` on the most significant qubits.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let num_qubits = self.num_qubits + other.num_qubits;
        if num_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits(num_qubits));
        }
        let amps = self
            .amps
            .iter()
            .flat_map(|a| other.amps.iter().map(move |b| a * b))
            .collect();
        Ok(StateVector { num_qubits, amps })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Amplitude> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Multiplies every amplitude by `e^{iφ}`.
    pub fn with_global_phase(&self, phi: f64) -> StateVector {
        let phase = Complex64::from_polar(1.0, phi);
        StateVector {
            num_qubits: self.num_qubits,
            amps: self.amps.iter().map(|a| a * phase).collect(),
        }
    }
}

pub(crate) fn norm_sqr(amps: &[Amplitude]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; u1 in (0, 1] keeps the log finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    entries: Vec<Amplitude>,
}

impl SquareMatrix {
    pub fn from_rows(rows: Vec<Vec<Amplitude>>) -> Result<Self> {
        let dim = rows.len();
        log2_exact(dim)?;
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            entries.extend(row);
        }
        check_finite(&entries)?;
        Ok(Self { dim, entries })
    }

    pub fn from_row_major(dim: usize, entries: Vec<Amplitude>) -> Result<Self> {
        log2_exact(dim)?;
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        check_finite(&entries)?;
        Ok(Self { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![ONE; dim])
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![ZERO; dim * dim],
        }
    }

    pub fn from_diagonal(diag: &[Amplitude]) -> Self {
        let dim = diag.len();
        let mut m = Self::zeros(dim);
        for (i, d) in diag.iter().enumerate() {
            m.entries[i * dim + i] = *d;
        }
        m
    }

    pub fn pauli_x() -> Self {
        Self {
            dim: 2,
            entries: vec![ZERO, ONE, ONE, ZERO],
        }
    }

    pub fn pauli_z() -> Self {
        Self::from_diagonal(&[ONE, -ONE])
    }

    pub fn hadamard() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self {
            dim: 2,
            entries: vec![h, h, h, -h],
        }
    }

    /// `|bit⟩⟨bit|` on a single qubit.
    pub fn projector(bit: u8) -> Self {
        if bit == 0 {
            Self::from_diagonal(&[ONE, ZERO])
        } else {
            Self::from_diagonal(&[ZERO, ONE])
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn get(&self, row: usize, col: usize) -> Amplitude {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[Amplitude] {
        &self.entries
    }

    pub fn row(&self, row: usize) -> &[Amplitude] {
        &self.entries[row * self.dim..(row + 1) * self.dim]
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out.entries[c * n + r] = self.entries[r * n + c].conj();
            }
        }
        out
    }

    pub fn scale(&self, k: Amplitude) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * k).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self.entries[r * n + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.entries[k * n..(k + 1) * n];
                let orow = &mut out.entries[r * n..(r + 1) * n];
                for (o, b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub(crate) fn mul_vec(&self, v: &[Amplitude]) -> Vec<Amplitude> {
        (0..self.dim)
            .map(|r| self.row(r).iter().zip(v).map(|(m, x)| m * x).sum())
            .collect()
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_dim(other)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_abs_diff(other).is_ok_and(|d| d <= tol)
    }

    /// Largest entrywise deviation of `self · self† − I`.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self
            .mul(&self.adjoint())
            .expect("adjoint has the same dimension");
        prod.max_abs_diff(&Self::identity(self.dim))
            .expect("identity has the same dimension")
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.approx_eq(&self.adjoint(), tol)
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        Ok(())
    }
}

/// Kronecker product `a ⊗ b`; `a` indexes the most significant block.
pub fn kron(a: &SquareMatrix, b: &SquareMatrix) -> SquareMatrix {
    let (da, db) = (a.dim, b.dim);
    let dim = da * db;
    let mut entries = vec![ZERO; dim * dim];
    for ar in 0..da {
        for ac in 0..da {
            let x = a.entries[ar * da + ac];
            if x == ZERO {
                continue;
            }
            for br in 0..db {
                for bc in 0..db {
                    entries[(ar * db + br) * dim + ac * db + bc] = x * b.entries[br * db + bc];
                }
            }
        }
    }
    SquareMatrix { dim, entries }
}

/// `m · v`. Rejects mismatched dimensions and matrices that are not unitary
/// within [`MATRIX_TOL`].
pub fn apply(m: &SquareMatrix, v: &StateVector) -> Result<StateVector> {
    if m.dim != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim,
            actual: v.dim(),
        });
    }
    let defect = m.unitarity_defect();
    if defect > MATRIX_TOL {
        return Err(Error::NotUnitary(defect));
    }
    Ok(StateVector {
        num_qubits: v.num_qubits,
        amps: m.mul_vec(&v.amps),
    })
}

/// `|⟨a|b⟩|`, clamped to [0, 1]. Equals 1 iff the states agree up to a global phase.
pub fn fidelity_up_to_phase(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm().min(1.0))
}

/// `m² = I` and `m = m†`, both entrywise within `tol`.
pub fn is_self_inverse(m: &SquareMatrix, tol: f64) -> bool {
    let square = m.mul(m).expect("same dimension");
    square.approx_eq(&SquareMatrix::identity(m.dim), tol) && m.is_hermitian(tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Amplitude {
        Complex64::new(re, im)
    }

    fn diag(values: &[f64]) -> SquareMatrix {
        SquareMatrix::from_diagonal(&values.iter().map(|&v| c(v, 0.0)).collect::<Vec<_>>())
    }

    #[test]
    fn kron_examples() {
        let i2 = SquareMatrix::identity(2);
        let z = SquareMatrix::pauli_z();
        assert_eq!(kron(&i2, &i2), SquareMatrix::identity(4));
        assert_eq!(kron(&z, &i2), diag(&[1.0, 1.0, -1.0, -1.0]));
        assert_eq!(kron(&z, &z), diag(&[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn kron_places_first_factor_on_high_bit() {
        let x = SquareMatrix::pauli_x();
        let m = kron(&x, &SquareMatrix::identity(2));
        // X on qubit 0 maps |00⟩ (index 0) to |10⟩ (index 2)
        assert_eq!(m.get(2, 0), ONE);
        assert_eq!(m.get(1, 0), ZERO);
    }

    #[test]
    fn apply_examples() {
        let v = StateVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        assert_eq!(apply(&SquareMatrix::identity(2), &v).unwrap(), v);

        let zero = StateVector::basis(1, 0).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        assert_eq!(apply(&SquareMatrix::pauli_x(), &zero).unwrap(), one);

        let plus = apply(&SquareMatrix::hadamard(), &zero).unwrap();
        assert!((plus.amps()[0] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((plus.amps()[1] - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn apply_rejects_bad_inputs() {
        let v = StateVector::basis(1, 0).unwrap();
        assert!(matches!(
            apply(&SquareMatrix::identity(4), &v),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            apply(&diag(&[1.0, 2.0]), &v),
            Err(Error::NotUnitary(_))
        ));
    }

    #[test]
    fn fidelity_examples() {
        let mut rng = rand::thread_rng();
        let v = StateVector::random(3, &mut rng).unwrap();
        assert!((fidelity_up_to_phase(&v, &v).unwrap() - 1.0).abs() < 1e-14);
        let rotated = v.with_global_phase(1.234);
        assert!((fidelity_up_to_phase(&v, &rotated).unwrap() - 1.0).abs() < 1e-14);
        let zero = StateVector::basis(1, 0).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        assert_eq!(fidelity_up_to_phase(&zero, &one).unwrap(), 0.0);
        assert!(fidelity_up_to_phase(&zero, &v).is_err());
    }

    #[test]
    fn self_inverse_examples() {
        let z = SquareMatrix::pauli_z();
        assert!(is_self_inverse(&kron(&z, &z), MATRIX_TOL));
        assert!(is_self_inverse(&SquareMatrix::identity(8), MATRIX_TOL));
        let phase = SquareMatrix::from_diagonal(&[ONE, Complex64::from_polar(1.0, PI / 3.0)]);
        assert!(!is_self_inverse(&phase, MATRIX_TOL));
        // unitary and squares to I but not Hermitian
        let iy = SquareMatrix::from_rows(vec![vec![ZERO, ONE], vec![-ONE, ZERO]]).unwrap();
        assert!(!is_self_inverse(&iy, MATRIX_TOL));
    }

    #[test]
    fn state_construction_validates() {
        assert!(matches!(
            StateVector::new(vec![ONE, ONE]),
            Err(Error::NotNormalized(_))
        ));
        assert!(matches!(
            StateVector::new(vec![ONE, ZERO, ZERO]),
            Err(Error::NotPowerOfTwo(3))
        ));
        assert!(matches!(
            StateVector::new(vec![c(f64::NAN, 0.0), ZERO]),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            StateVector::basis(13, 0),
            Err(Error::TooManyQubits(13))
        ));
    }

    #[test]
    fn tensor_matches_kron_of_preparations() {
        let mut rng = rand::thread_rng();
        let a = StateVector::random(1, &mut rng).unwrap();
        let b = StateVector::random(2, &mut rng).unwrap();
        let joint = a.tensor(&b).unwrap();
        assert_eq!(joint.num_qubits(), 3);
        for i in 0..2 {
            for j in 0..4 {
                assert_eq!(joint.amps()[i * 4 + j], a.amps()[i] * b.amps()[j]);
            }
        }
    }
}
