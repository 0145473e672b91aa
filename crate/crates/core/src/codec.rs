//! Command words and the general gate array.
//!
//! A machine over `n` data qubits takes `n + 1` classical bits: `c0` picks
//! the layer and `c1..cn` pick the qubits. With `c0 = 0` the word selects the
//! coupling operator `J_S(θ) = exp(−iθ ∏_{i∈S} σ_iz / 2)` whose angle arrives
//! separately in an angle state; with `c0 = 1` it selects `X` on every qubit
//! in `S`. A word always carries exactly one instruction.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::generators::{
    controlled_b, format_index_list, parse_index_list, u_of_theta, validate_subset, z_on_qubit,
    Angle, Generator,
};
use crate::linalg::{kron, SquareMatrix, StateVector};
use crate::retrieval::{gb_step, make_angle_state, AngleState, RetrievalOutcome};
use crate::rng::OutcomeSampler;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CommandWord {
    c0: bool,
    bits: Vec<bool>,
}

impl CommandWord {
    /// `bits[i]` is `c_{i+1}`. Semantic validity is checked by [`decode`].
    pub fn new(c0: bool, bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::InvalidCommand(
                "command word has no data bits".into(),
            ));
        }
        Ok(Self { c0, bits })
    }

    pub fn c0(&self) -> bool {
        self.c0
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn num_data_qubits(&self) -> usize {
        self.bits.len()
    }

    /// `c1..cn` as a string of `0`/`1`.
    pub fn data_bit_string(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    /// Parses `c1..cn`.
    pub fn parse_data_bits(c0: bool, text: &str) -> Result<Self> {
        let bits = text
            .chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidCommand(format!(
                    "bad bit {other:?} in {text:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(c0, bits)
    }

    /// Parses the full `c0||c1..cn` form.
    pub fn parse(text: &str) -> Result<Self> {
        let mut chars = text.chars();
        let c0 = match chars.next() {
            Some('0') => false,
            Some('1') => true,
            _ => return Err(Error::InvalidCommand(format!("bad command word {text:?}"))),
        };
        Self::parse_data_bits(c0, chars.as_str())
    }

    fn selected(&self) -> BTreeSet<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Serialized as `c0||c1..cn`.
impl fmt::Display for CommandWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", u8::from(self.c0), self.data_bit_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Coupling {
        subset: BTreeSet<usize>,
        theta: Angle,
    },
    NotGates {
        subset: BTreeSet<usize>,
    },
}

impl Instruction {
    pub fn coupling(subset: impl IntoIterator<Item = usize>, theta: Angle) -> Self {
        Self::Coupling {
            subset: subset.into_iter().collect(),
            theta,
        }
    }

    pub fn not_gates(subset: impl IntoIterator<Item = usize>) -> Self {
        Self::NotGates {
            subset: subset.into_iter().collect(),
        }
    }

    pub fn subset(&self) -> &BTreeSet<usize> {
        match self {
            Self::Coupling { subset, .. } | Self::NotGates { subset } => subset,
        }
    }

    pub fn skeleton(&self) -> InstructionSkeleton {
        match self {
            Self::Coupling { subset, .. } => InstructionSkeleton::Coupling {
                subset: subset.clone(),
            },
            Self::NotGates { subset } => InstructionSkeleton::NotGates {
                subset: subset.clone(),
            },
        }
    }

    /// The unitary this instruction applies on `n` data qubits.
    pub fn unitary(&self, n: usize) -> Result<SquareMatrix> {
        let subset =
            validate_subset(n, self.subset().iter().copied()).map_err(Error::InvalidCommand)?;
        Ok(match self {
            Self::Coupling { theta, .. } => {
                u_of_theta(&Generator::pauli_z_subset(n, subset)?, *theta)
            }
            Self::NotGates { .. } => not_layer(n, &subset),
        })
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Coupling { subset, theta } => {
                write!(f, "J {} {}", format_index_list(subset), theta)
            }
            Self::NotGates { subset } => write!(f, "X {}", format_index_list(subset)),
        }
    }
}

/// What a command word says, without the angle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstructionSkeleton {
    Coupling { subset: BTreeSet<usize> },
    NotGates { subset: BTreeSet<usize> },
}

/// `X` on every qubit of `subset`, identity elsewhere.
fn not_layer(n: usize, subset: &BTreeSet<usize>) -> SquareMatrix {
    (1..=n)
        .map(|q| {
            if subset.contains(&q) {
                SquareMatrix::pauli_x()
            } else {
                SquareMatrix::identity(2)
            }
        })
        .reduce(|a, b| kron(&a, &b))
        .expect("n >= 1")
}

/// An ordered instruction list; list order is application order.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    num_data_qubits: usize,
    instructions: Vec<Instruction>,
}

impl Program {
    pub fn new(num_data_qubits: usize, instructions: Vec<Instruction>) -> Result<Self> {
        if num_data_qubits == 0 {
            return Err(Error::InvalidCommand(
                "program needs at least one data qubit".into(),
            ));
        }
        if num_data_qubits + 1 > crate::linalg::MAX_QUBITS {
            return Err(Error::TooManyQubits(num_data_qubits + 1));
        }
        for instr in &instructions {
            validate_subset(num_data_qubits, instr.subset().iter().copied())
                .map_err(|e| Error::InvalidCommand(format!("{instr}: {e}")))?;
        }
        Ok(Self {
            num_data_qubits,
            instructions,
        })
    }

    pub fn num_data_qubits(&self) -> usize {
        self.num_data_qubits
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Parses the text form: one `J <i,j,...> <theta>` or `X <i,j,...>` per
    /// line, an optional `qubits <n>` line, `#` comments.
    ///
    /// The register width comes from the `qubits` line, then `num_qubits`,
    /// then the largest index mentioned (at least 1).
    pub fn parse(text: &str, num_qubits: Option<usize>) -> Result<Self> {
        let mut declared = None;
        let mut instructions = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: idx + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["qubits", n] => {
                    declared = Some(n.parse::<usize>().map_err(|e| err(format!("{n:?}: {e}")))?);
                }
                ["J", subset, theta] => {
                    let subset = parse_index_list(subset).map_err(err)?;
                    let theta = theta
                        .parse::<f64>()
                        .map_err(|e| err(format!("{theta:?}: {e}")))
                        .and_then(|t| Angle::new(t).map_err(|e| err(e.to_string())))?;
                    instructions.push(Instruction::Coupling { subset, theta });
                }
                ["X", subset] => {
                    let subset = parse_index_list(subset).map_err(err)?;
                    instructions.push(Instruction::NotGates { subset });
                }
                _ => return Err(err(format!("unrecognized instruction {line:?}"))),
            }
        }
        let widest = instructions
            .iter()
            .flat_map(|i| i.subset().iter().copied())
            .max()
            .unwrap_or(1);
        Self::new(declared.or(num_qubits).unwrap_or(widest), instructions)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("qubits {}\n", self.num_data_qubits);
        for instr in &self.instructions {
            out.push_str(&instr.to_string());
            out.push('\n');
        }
        out
    }
}

/// Command word for `instr` on an `n`-qubit machine, plus the angle state
/// for coupling instructions.
pub fn encode(instr: &Instruction, n: usize) -> Result<(CommandWord, Option<AngleState>)> {
    let subset =
        validate_subset(n, instr.subset().iter().copied()).map_err(Error::InvalidCommand)?;
    let bits = (1..=n).map(|q| subset.contains(&q)).collect();
    match instr {
        Instruction::Coupling { theta, .. } => Ok((
            CommandWord::new(false, bits)?,
            Some(make_angle_state(*theta)),
        )),
        Instruction::NotGates { .. } => Ok((CommandWord::new(true, bits)?, None)),
    }
}

pub fn decode(word: &CommandWord) -> Result<InstructionSkeleton> {
    let subset = word.selected();
    if subset.is_empty() {
        return Err(Error::InvalidCommand(format!(
            "word {word} selects no qubits"
        )));
    }
    Ok(if word.c0 {
        InstructionSkeleton::NotGates { subset }
    } else {
        InstructionSkeleton::Coupling { subset }
    })
}

/// Executes one command word on `data`.
///
/// Coupling words run `G_B` with `B = ∏_{i∈S} σ_iz` and consume the angle
/// state. NotGates words flip the selected qubits without measurement and
/// always succeed.
pub fn general_gate_array<S: OutcomeSampler + ?Sized>(
    word: &CommandWord,
    angle: Option<AngleState>,
    data: &StateVector,
    rng: &mut S,
) -> Result<RetrievalOutcome> {
    let n = word.num_data_qubits();
    if data.num_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: 1 << n,
            actual: data.dim(),
        });
    }
    match (decode(word)?, angle) {
        (InstructionSkeleton::Coupling { subset }, Some(angle)) => {
            let g = Generator::pauli_z_subset(n, subset)?;
            gb_step(angle, &g, data, rng)
        }
        (InstructionSkeleton::Coupling { .. }, None) => Err(Error::InvalidCommand(
            "coupling command without an angle state".into(),
        )),
        (InstructionSkeleton::NotGates { subset }, None) => {
            let mask = subset.iter().fold(0usize, |m, &q| m | 1 << (n - q));
            Ok(RetrievalOutcome {
                success: true,
                measured_bit: 0,
                post_data: data.permuted(|i| i ^ mask),
                attempt_angle: None,
            })
        }
        (InstructionSkeleton::NotGates { .. }, Some(_)) => Err(Error::InvalidCommand(
            "NOT command does not take an angle state".into(),
        )),
    }
}

/// Compares the chain of controlled-σ_z gates (angle qubit controlling each
/// data qubit in `subset`) with controlled-B for `B = ∏_{i∈S} σ_iz`.
pub fn coupling_circuit_equivalence(n: usize, subset: &BTreeSet<usize>) -> bool {
    let Ok(g) = Generator::pauli_z_subset(n, subset.iter().copied()) else {
        return false;
    };
    let dim = 1 << n;
    let chain = subset
        .iter()
        .map(|&q| {
            kron(&SquareMatrix::projector(0), &SquareMatrix::identity(dim))
                .add(&kron(&SquareMatrix::projector(1), &z_on_qubit(n, q)))
                .expect("same dimension")
        })
        .fold(SquareMatrix::identity(2 * dim), |acc, cz| {
            cz.mul(&acc).expect("same dimension")
        });
    chain.approx_eq(&controlled_b(&g), 1e-12)
}

/// Number of distinct nonempty σ_z-subset generators on `n` qubits.
pub fn generator_count(n: u32) -> u64 {
    (1u64 << n) - 1
}

/// Product of the instruction unitaries, later instructions on the left.
pub fn compose_program_unitary(p: &Program) -> Result<SquareMatrix> {
    p.instructions.iter().try_fold(
        SquareMatrix::identity(1 << p.num_data_qubits),
        |acc, instr| instr.unitary(p.num_data_qubits)?.mul(&acc),
    )
}
