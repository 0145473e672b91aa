//! Reference implementations used as test oracles. Plain nested `Vec`
//! matrices built straight from the definitions, sharing no code with the
//! library's linear algebra.
#![allow(dead_code)]

pub use num_complex::Complex64 as C;
use qstore::codec::{Instruction, Program};
use qstore::generators::{generator_matrix, Generator, GeneratorKind};
use qstore::linalg::StateVector;
use rand::Rng;

pub type Mat = Vec<Vec<C>>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn eye(d: usize) -> Mat {
    (0..d)
        .map(|r| {
            (0..d)
                .map(|k| if r == k { c(1.0, 0.0) } else { c(0.0, 0.0) })
                .collect()
        })
        .collect()
}

pub fn diag(entries: &[C]) -> Mat {
    let mut m = vec![vec![c(0.0, 0.0); entries.len()]; entries.len()];
    for (i, e) in entries.iter().enumerate() {
        m[i][i] = *e;
    }
    m
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let d = a.len();
    let mut out = vec![vec![c(0.0, 0.0); d]; d];
    for i in 0..d {
        for k in 0..d {
            if a[i][k] == c(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn matvec(a: &Mat, v: &[C]) -> Vec<C> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn kron2(a: &Mat, b: &Mat) -> Mat {
    let (da, db) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); da * db]; da * db];
    for i in 0..da {
        for j in 0..da {
            for k in 0..db {
                for l in 0..db {
                    out[i * db + k][j * db + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn lincomb(x: C, a: &Mat, y: C, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(p, q)| x * p + y * q).collect())
        .collect()
}

pub fn max_diff(a: &Mat, b: &[C]) -> f64 {
    let flat: Vec<C> = a.iter().flatten().copied().collect();
    flat.iter()
        .zip(b)
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max)
}

pub fn max_diff_mat(a: &Mat, b: &Mat) -> f64 {
    let flat: Vec<C> = b.iter().flatten().copied().collect();
    max_diff(a, &flat)
}

/// Bit mask of a 1-based subset; qubit 1 is the most significant of `n`.
pub fn subset_mask(n: usize, subset: impl IntoIterator<Item = usize>) -> usize {
    subset.into_iter().map(|q| 1 << (n - q)).sum()
}

/// `∏ σ_z` over the masked qubits: diagonal of parity signs.
pub fn z_string(n: usize, mask: usize) -> Mat {
    let entries: Vec<C> = (0..1usize << n)
        .map(|i| {
            if (i & mask).count_ones().is_multiple_of(2) {
                c(1.0, 0.0)
            } else {
                c(-1.0, 0.0)
            }
        })
        .collect();
    diag(&entries)
}

/// `X` on the masked qubits: the permutation `|i⟩ → |i ⊕ mask⟩`.
pub fn x_string(n: usize, mask: usize) -> Mat {
    let d = 1usize << n;
    let mut m = vec![vec![c(0.0, 0.0); d]; d];
    for i in 0..d {
        m[i ^ mask][i] = c(1.0, 0.0);
    }
    m
}

/// Generator matrix rebuilt from its description.
pub fn generator_oracle(g: &Generator) -> Mat {
    match g.kind() {
        GeneratorKind::PauliZSubset {
            num_data_qubits,
            subset,
        } => z_string(
            *num_data_qubits,
            subset_mask(*num_data_qubits, subset.iter().copied()),
        ),
        GeneratorKind::PhaseShift { num_data_qubits } => {
            let d = 1usize << num_data_qubits;
            let entries: Vec<C> = (0..d)
                .map(|i| {
                    if i == d - 1 {
                        c(-1.0, 0.0)
                    } else {
                        c(1.0, 0.0)
                    }
                })
                .collect();
            diag(&entries)
        }
        // user-supplied matrices have no independent description
        GeneratorKind::Dense { .. } => {
            let m = generator_matrix(g);
            (0..m.dim()).map(|r| m.row(r).to_vec()).collect()
        }
    }
}

/// `cos(θ/2)·I − i·sin(θ/2)·B`.
pub fn rotation(b: &Mat, theta: f64) -> Mat {
    let (s, co) = (theta / 2.0).sin_cos();
    lincomb(c(co, 0.0), &eye(b.len()), c(0.0, -s), b)
}

pub fn instruction_oracle(n: usize, instr: &Instruction) -> Mat {
    let mask = subset_mask(n, instr.subset().iter().copied());
    match instr {
        Instruction::Coupling { theta, .. } => rotation(&z_string(n, mask), theta.radians()),
        Instruction::NotGates { .. } => x_string(n, mask),
    }
}

pub fn program_oracle(p: &Program) -> Mat {
    let n = p.num_data_qubits();
    p.instructions().iter().fold(eye(1 << n), |acc, i| {
        matmul(&instruction_oracle(n, i), &acc)
    })
}

/// `|⟨a|b⟩|` for unit vectors.
pub fn overlap(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C>().norm()
}

pub fn random_subset<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mask = rng.gen_range(1usize..1 << n);
    (1..=n).filter(|q| mask >> (n - q) & 1 == 1).collect()
}

pub fn random_program<R: Rng>(max_qubits: usize, max_len: usize, rng: &mut R) -> Program {
    let n = rng.gen_range(1..=max_qubits);
    let len = rng.gen_range(0..=max_len);
    let instructions = (0..len)
        .map(|_| {
            let s = random_subset(n, rng);
            if rng.gen_bool(0.7) {
                let theta = qstore::generators::Angle::new(rng.gen_range(-3.2..3.2)).unwrap();
                Instruction::coupling(s, theta)
            } else {
                Instruction::not_gates(s)
            }
        })
        .collect();
    Program::new(n, instructions).unwrap()
}

pub fn amps(s: &StateVector) -> Vec<C> {
    s.amps().to_vec()
}
