//! Self-inverse Hermitian generators `B` and the operators built from them:
//! `U_B(θ) = exp(−iθB/2) = cos(θ/2)·I − i·sin(θ/2)·B` and the controlled-B
//! gate `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ B`.
//!
//! Data qubits are numbered from 1; data qubit 1 is the most significant bit
//! of the data register index.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{is_self_inverse, kron, Amplitude, SquareMatrix, MATRIX_TOL, MAX_QUBITS};

/// Rotation angle in radians. Any finite value; no wrapping is applied.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Angle(f64);

impl Angle {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::NonFinite(format!("angle {theta}")));
        }
        Ok(Self(theta))
    }

    pub const fn zero() -> Self {
        Self(0.0)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// `2θ`, exact in binary floating point.
    pub fn doubled(self) -> Self {
        Self(self.0 * 2.0)
    }

    /// `2^k · θ`.
    pub fn scaled_pow2(self, k: u32) -> Self {
        Self(self.0 * 2f64.powi(k as i32))
    }
}

impl std::ops::Neg for Angle {
    type Output = Angle;

    fn neg(self) -> Angle {
        Angle(-self.0)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorKind {
    /// `σ_z` on every data qubit in `subset`, identity elsewhere.
    PauliZSubset {
        num_data_qubits: usize,
        subset: BTreeSet<usize>,
    },
    /// `σ_z` on the last qubit when all others are `|1⟩`, identity otherwise.
    /// `U_B(θ)` is then the n-qubit phase-shift gate up to `e^{−iθ/2}`.
    PhaseShift {
        num_data_qubits: usize,
    },
    Dense {
        matrix: SquareMatrix,
    },
}

/// A validated self-inverse Hermitian generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    kind: GeneratorKind,
}

impl Generator {
    pub fn pauli_z_subset<I>(num_data_qubits: usize, subset: I) -> Result<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        check_data_qubits(num_data_qubits)?;
        let subset = validate_subset(num_data_qubits, subset).map_err(Error::InvalidGenerator)?;
        Ok(Self {
            kind: GeneratorKind::PauliZSubset {
                num_data_qubits,
                subset,
            },
        })
    }

    pub fn phase_shift(num_data_qubits: usize) -> Result<Self> {
        check_data_qubits(num_data_qubits)?;
        Ok(Self {
            kind: GeneratorKind::PhaseShift { num_data_qubits },
        })
    }

    /// Wraps a user matrix. Fails unless it is Hermitian and squares to the
    /// identity within [`MATRIX_TOL`].
    pub fn dense(matrix: SquareMatrix) -> Result<Self> {
        check_data_qubits(matrix.num_qubits())?;
        if !is_self_inverse(&matrix, MATRIX_TOL) {
            return Err(Error::NotSelfInverse);
        }
        Ok(Self {
            kind: GeneratorKind::Dense { matrix },
        })
    }

    pub fn kind(&self) -> &GeneratorKind {
        &self.kind
    }

    pub fn num_data_qubits(&self) -> usize {
        match &self.kind {
            GeneratorKind::PauliZSubset {
                num_data_qubits, ..
            }
            | GeneratorKind::PhaseShift { num_data_qubits } => *num_data_qubits,
            GeneratorKind::Dense { matrix } => matrix.num_qubits(),
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.num_data_qubits()
    }

    /// Diagonal of `B` for the diagonal variants, `None` for dense.
    fn diagonal_sign(&self, index: usize) -> Option<f64> {
        match &self.kind {
            GeneratorKind::PauliZSubset {
                num_data_qubits,
                subset,
            } => {
                let flips = subset
                    .iter()
                    .filter(|&&q| (index >> (num_data_qubits - q)) & 1 == 1)
                    .count();
                Some(if flips % 2 == 0 { 1.0 } else { -1.0 })
            }
            GeneratorKind::PhaseShift { num_data_qubits } => {
                let last = (1usize << num_data_qubits) - 1;
                Some(if index == last { -1.0 } else { 1.0 })
            }
            GeneratorKind::Dense { .. } => None,
        }
    }

    /// `B · amps` without materializing `B` for the diagonal variants.
    pub(crate) fn apply_to(&self, amps: &[Amplitude]) -> Vec<Amplitude> {
        match &self.kind {
            GeneratorKind::Dense { matrix } => matrix.mul_vec(amps),
            _ => amps
                .iter()
                .enumerate()
                .map(|(i, a)| a * self.diagonal_sign(i).expect("diagonal variant"))
                .collect(),
        }
    }

    /// Parses the CLI syntax `z:<i>,<j>,...`, `ps:<n>` or `dense:<path>`.
    ///
    /// `num_qubits` sets the data register width for `z:`; when absent the
    /// largest listed index is used. For `ps:` and `dense:` it must agree
    /// with the width implied by the argument if given.
    pub fn parse_spec(spec: &str, num_qubits: Option<usize>) -> Result<Self> {
        let (tag, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::InvalidGenerator(format!("missing ':' in {spec:?}")))?;
        let generator = match tag.trim() {
            "z" => {
                let subset = parse_index_list(rest).map_err(Error::InvalidGenerator)?;
                let widest = subset.iter().copied().max().unwrap_or(0);
                Self::pauli_z_subset(num_qubits.unwrap_or(widest), subset)?
            }
            "ps" => {
                let n = rest.trim().parse::<usize>().map_err(|e| {
                    Error::InvalidGenerator(format!("bad qubit count {rest:?}: {e}"))
                })?;
                Self::phase_shift(n)?
            }
            "dense" => Self::dense(read_dense_matrix(Path::new(rest.trim()))?)?,
            other => {
                return Err(Error::InvalidGenerator(format!(
                    "unknown generator kind {other:?}"
                )))
            }
        };
        if let Some(n) = num_qubits {
            if n != generator.num_data_qubits() {
                return Err(Error::InvalidGenerator(format!(
                    "generator acts on {} qubits but {n} were requested",
                    generator.num_data_qubits()
                )));
            }
        }
        Ok(generator)
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            GeneratorKind::PauliZSubset { subset, .. } => {
                write!(f, "z:{}", format_index_list(subset))
            }
            GeneratorKind::PhaseShift { num_data_qubits } => write!(f, "ps:{num_data_qubits}"),
            GeneratorKind::Dense { matrix } => {
                write!(f, "dense[{}x{}]", matrix.dim(), matrix.dim())
            }
        }
    }
}

fn check_data_qubits(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidGenerator(
            "needs at least one data qubit".into(),
        ));
    }
    // one qubit is reserved for the angle register
    if n + 1 > MAX_QUBITS {
        return Err(Error::TooManyQubits(n + 1));
    }
    Ok(())
}

/// Checks that `subset` is nonempty and within `1..=n`.
pub(crate) fn validate_subset<I>(
    n: usize,
    subset: I,
) -> std::result::Result<BTreeSet<usize>, String>
where
    I: IntoIterator<Item = usize>,
{
    let subset: BTreeSet<usize> = subset.into_iter().collect();
    if subset.is_empty() {
        return Err("empty qubit subset".into());
    }
    if let Some(bad) = subset.iter().find(|&&q| q == 0 || q > n) {
        return Err(format!("qubit index {bad} outside 1..={n}"));
    }
    Ok(subset)
}

pub(crate) fn parse_index_list(text: &str) -> std::result::Result<BTreeSet<usize>, String> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad qubit index {t:?}: {e}"))
        })
        .collect()
}

pub(crate) fn format_index_list(subset: &BTreeSet<usize>) -> String {
    subset
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Parses rows of whitespace-separated `re,im` pairs. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_dense_matrix(text: &str) -> Result<SquareMatrix> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                parse_complex(tok).map_err(|msg| Error::Parse {
                    line: lineno + 1,
                    msg,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    SquareMatrix::from_rows(rows)
}

pub fn read_dense_matrix(path: &Path) -> Result<SquareMatrix> {
    parse_dense_matrix(&std::fs::read_to_string(path)?)
}

fn parse_complex(tok: &str) -> std::result::Result<Amplitude, String> {
    let (re, im) = tok
        .split_once(',')
        .ok_or_else(|| format!("expected re,im but found {tok:?}"))?;
    let re = re.parse::<f64>().map_err(|e| format!("{re:?}: {e}"))?;
    let im = im.parse::<f64>().map_err(|e| format!("{im:?}: {e}"))?;
    Ok(Complex64::new(re, im))
}

/// The matrix of `B`.
pub fn generator_matrix(g: &Generator) -> SquareMatrix {
    match &g.kind {
        GeneratorKind::Dense { matrix } => matrix.clone(),
        _ => {
            let diag: Vec<Amplitude> = (0..g.dim())
                .map(|i| Complex64::new(g.diagonal_sign(i).expect("diagonal variant"), 0.0))
                .collect();
            SquareMatrix::from_diagonal(&diag)
        }
    }
}

/// `U_B(θ) = cos(θ/2)·I − i·sin(θ/2)·B`.
pub fn u_of_theta(g: &Generator, theta: Angle) -> SquareMatrix {
    let half = theta.radians() / 2.0;
    let identity_part = SquareMatrix::identity(g.dim()).scale(Complex64::new(half.cos(), 0.0));
    let generator_part = generator_matrix(g).scale(Complex64::new(0.0, -half.sin()));
    identity_part.add(&generator_part).expect("same dimension")
}

/// `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ B` with the control qubit most significant.
pub fn controlled_b(g: &Generator) -> SquareMatrix {
    let d = g.dim();
    let b = generator_matrix(g);
    let dim = 2 * d;
    let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
    for i in 0..d {
        entries[i * dim + i] = Complex64::new(1.0, 0.0);
        for j in 0..d {
            entries[(d + i) * dim + d + j] = b.get(i, j);
        }
    }
    SquareMatrix::from_row_major(dim, entries).expect("power-of-two dimension")
}

/// Checks `e^{iθ/2} · U_B(θ) = diag(1, …, 1, e^{iθ})` for the phase-shift
/// generator on `n` qubits.
pub fn phase_shift_equivalence_check(n: usize, theta: Angle) -> bool {
    let Ok(g) = Generator::phase_shift(n) else {
        return false;
    };
    let dim = g.dim();
    let lhs = u_of_theta(&g, theta).scale(Complex64::from_polar(1.0, theta.radians() / 2.0));
    let mut diag = vec![Complex64::new(1.0, 0.0); dim];
    diag[dim - 1] = Complex64::from_polar(1.0, theta.radians());
    lhs.approx_eq(&SquareMatrix::from_diagonal(&diag), MATRIX_TOL)
}

/// `σ_z` on data qubit `q` (1-based) of an `n`-qubit register, built as a
/// Kronecker chain.
pub fn z_on_qubit(n: usize, q: usize) -> SquareMatrix {
    (1..=n)
        .map(|i| {
            if i == q {
                SquareMatrix::pauli_z()
            } else {
                SquareMatrix::identity(2)
            }
        })
        .reduce(|acc, m| kron(&acc, &m))
        .expect("n >= 1")
}
