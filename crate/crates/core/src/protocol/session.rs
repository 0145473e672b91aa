use crate::codec::{
    decode, encode, general_gate_array, CommandWord, Instruction, InstructionSkeleton, Program,
};
use crate::error::{Error, Result};
use crate::generators::Angle;
use crate::linalg::StateVector;
use crate::retrieval::{make_angle_state, AngleState, DEFAULT_MAX_ATTEMPTS};
use crate::rng::OutcomeSampler;

use super::wire::{ErrorCode, ProtocolMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AlicePhase {
    Start,
    AwaitResult,
    Done,
}

/// The program owner. Keeps every `θ` to herself and only ever sends angle
/// amplitudes; after a failure she resends the current instruction's angle
/// doubled.
#[derive(Debug, Clone)]
pub struct AliceSession {
    program: Program,
    cursor: usize,
    pending_theta: Option<Angle>,
    failures_this_op: u32,
    max_attempts: u32,
    phase: AlicePhase,
}

impl AliceSession {
    pub fn new(program: Program) -> Self {
        Self::with_max_attempts(program, DEFAULT_MAX_ATTEMPTS)
    }

    /// `max_attempts` bounds the angle states spent on any one instruction.
    pub fn with_max_attempts(program: Program, max_attempts: u32) -> Self {
        Self {
            program,
            cursor: 0,
            pending_theta: None,
            failures_this_op: 0,
            max_attempts: max_attempts.max(1),
            phase: AlicePhase::Start,
        }
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn failures_this_op(&self) -> u32 {
        self.failures_this_op
    }

    pub fn pending_theta(&self) -> Option<Angle> {
        self.pending_theta
    }

    pub fn is_done(&self) -> bool {
        self.phase == AlicePhase::Done
    }

    /// Messages to send next. `feedback` is Bob's last `Result`; it must be
    /// `None` exactly on the first call.
    pub fn next(&mut self, feedback: Option<bool>) -> Result<Vec<ProtocolMessage>> {
        match (self.phase, feedback) {
            (AlicePhase::Start, None) => {
                let mut out = vec![ProtocolMessage::ProgramBegin {
                    n: self.program.num_data_qubits(),
                }];
                out.extend(self.emit_current()?);
                Ok(out)
            }
            (AlicePhase::AwaitResult, Some(true)) => {
                self.cursor += 1;
                self.emit_current()
            }
            (AlicePhase::AwaitResult, Some(false)) => {
                let theta = self.pending_theta.ok_or_else(|| {
                    Error::ProtocolViolation(
                        "failure reported for an instruction that cannot fail".into(),
                    )
                })?;
                self.failures_this_op += 1;
                if self.failures_this_op >= self.max_attempts {
                    return Err(Error::RetryLimit(self.max_attempts));
                }
                let doubled = theta.doubled();
                self.pending_theta = Some(doubled);
                Ok(vec![angle_message(make_angle_state(doubled))])
            }
            (AlicePhase::Done, _) => {
                Err(Error::ProtocolViolation("session already finished".into()))
            }
            (AlicePhase::Start, Some(_)) => Err(Error::ProtocolViolation(
                "feedback before anything was sent".into(),
            )),
            (AlicePhase::AwaitResult, None) => Err(Error::ProtocolViolation(
                "missing feedback for pending instruction".into(),
            )),
        }
    }

    fn emit_current(&mut self) -> Result<Vec<ProtocolMessage>> {
        self.failures_this_op = 0;
        let Some(instr) = self.program.instructions().get(self.cursor) else {
            self.pending_theta = None;
            self.phase = AlicePhase::Done;
            return Ok(vec![ProtocolMessage::ProgramEnd]);
        };
        self.pending_theta = match instr {
            Instruction::Coupling { theta, .. } => Some(*theta),
            Instruction::NotGates { .. } => None,
        };
        let (word, angle) = encode(instr, self.program.num_data_qubits())?;
        let mut out = vec![ProtocolMessage::Command { word }];
        out.extend(angle.map(angle_message));
        self.phase = AlicePhase::AwaitResult;
        Ok(out)
    }
}

fn angle_message(angle: AngleState) -> ProtocolMessage {
    let (amp0, amp1) = angle.amplitudes();
    ProtocolMessage::AngleQubit { amp0, amp1 }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BobPhase {
    AwaitBegin,
    AwaitCommand,
    AwaitAngle,
    Executing,
    Done,
    Aborted,
}

/// The executing party. Holds the data register, runs the general gate
/// array and reports only whether each attempt succeeded.
///
/// Angle amplitudes arrive as plain numbers; single use is enforced here by
/// accepting exactly one `AngleQubit` per pending coupling attempt.
#[derive(Debug, Clone)]
pub struct BobSession {
    data: StateVector,
    phase: BobPhase,
    command: Option<CommandWord>,
    executed_attempts: u64,
}

impl BobSession {
    pub fn new(data: StateVector) -> Self {
        Self {
            data,
            phase: BobPhase::AwaitBegin,
            command: None,
            executed_attempts: 0,
        }
    }

    pub fn data(&self) -> &StateVector {
        &self.data
    }

    pub fn into_data(self) -> StateVector {
        self.data
    }

    pub fn phase(&self) -> &BobPhase {
        &self.phase
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.phase, BobPhase::Done | BobPhase::Aborted)
    }

    /// Gate-array executions so far, NOT layers included.
    pub fn executed_attempts(&self) -> u64 {
        self.executed_attempts
    }

    /// Processes one message and returns the reply, if any. Any message that
    /// is illegal in the current phase yields an `Error` reply and aborts.
    pub fn handle<S: OutcomeSampler + ?Sized>(
        &mut self,
        msg: &ProtocolMessage,
        rng: &mut S,
    ) -> Option<ProtocolMessage> {
        match self.step(msg, rng) {
            Ok(reply) => reply,
            Err((code, detail)) => {
                self.phase = BobPhase::Aborted;
                self.command = None;
                Some(ProtocolMessage::Error { code, detail })
            }
        }
    }

    fn step<S: OutcomeSampler + ?Sized>(
        &mut self,
        msg: &ProtocolMessage,
        rng: &mut S,
    ) -> std::result::Result<Option<ProtocolMessage>, (ErrorCode, String)> {
        let out_of_phase = |phase: &BobPhase| {
            (
                ErrorCode::OutOfPhase,
                format!("{} not allowed in phase {phase:?}", msg.type_name()),
            )
        };
        match (&self.phase, msg) {
            (BobPhase::AwaitBegin, ProtocolMessage::ProgramBegin { n }) => {
                if *n != self.data.num_qubits() {
                    return Err((
                        ErrorCode::Dimension,
                        format!(
                            "program for {n} qubits, register has {}",
                            self.data.num_qubits()
                        ),
                    ));
                }
                self.phase = BobPhase::AwaitCommand;
                Ok(None)
            }
            (BobPhase::AwaitCommand, ProtocolMessage::Command { word }) => {
                if word.num_data_qubits() != self.data.num_qubits() {
                    return Err((
                        ErrorCode::Dimension,
                        format!("command {word} has wrong width"),
                    ));
                }
                match decode(word).map_err(|e| (ErrorCode::InvalidCommand, e.to_string()))? {
                    InstructionSkeleton::Coupling { .. } => {
                        self.command = Some(word.clone());
                        self.phase = BobPhase::AwaitAngle;
                        Ok(None)
                    }
                    InstructionSkeleton::NotGates { .. } => self.execute(word, None, rng).map(Some),
                }
            }
            (BobPhase::AwaitCommand, ProtocolMessage::ProgramEnd) => {
                self.phase = BobPhase::Done;
                Ok(None)
            }
            (BobPhase::AwaitAngle, ProtocolMessage::AngleQubit { amp0, amp1 }) => {
                let angle = AngleState::from_amplitudes(*amp0, *amp1)
                    .map_err(|e| (ErrorCode::InvalidAngle, e.to_string()))?;
                let word = self.command.clone().expect("command set in AwaitAngle");
                self.execute(&word, Some(angle), rng).map(Some)
            }
            (phase, _) => Err(out_of_phase(phase)),
        }
    }

    fn execute<S: OutcomeSampler + ?Sized>(
        &mut self,
        word: &CommandWord,
        angle: Option<AngleState>,
        rng: &mut S,
    ) -> std::result::Result<ProtocolMessage, (ErrorCode, String)> {
        self.phase = BobPhase::Executing;
        let outcome = general_gate_array(word, angle, &self.data, rng)
            .map_err(|e| (ErrorCode::InvalidCommand, e.to_string()))?;
        self.executed_attempts += 1;
        // on failure the wrong-branch state stays; the next angle corrects it
        self.data = outcome.post_data;
        if outcome.success {
            self.command = None;
            self.phase = BobPhase::AwaitCommand;
        } else {
            self.phase = BobPhase::AwaitAngle;
        }
        Ok(ProtocolMessage::Result {
            success: outcome.success,
        })
    }
}
