//! Interactive program distribution between Alice (who owns the program) and
//! Bob (who owns the data).
//!
//! 1. Alice encodes the first instruction as a command word plus, for a
//!    coupling, an angle state, and sends them.
//! 2. Bob runs the general gate array and replies with the measurement result.
//! 3. On failure Alice sends the angle state for twice the previous angle;
//!    on success she moves to the next instruction.
//! 4. Repeat until the last instruction succeeds, then `ProgramEnd`.
//!
//! The angle qubit travels as two complex amplitudes. A classical channel
//! can copy those freely, so no-cloning is not modelled; instead Bob accepts
//! exactly one `AngleQubit` per pending attempt and rejects anything else.

mod session;
mod transport;
mod wire;

use std::net::{TcpListener, TcpStream};
use std::thread;

use thiserror::Error;

use crate::codec::Program;
use crate::error::Error as QError;
use crate::linalg::StateVector;
use crate::retrieval::DEFAULT_MAX_ATTEMPTS;

pub use session::{AliceSession, BobPhase, BobSession};
pub use transport::{serve_bob, BobOutcome, LoopbackTransport, StreamTransport, Transport};
pub use wire::{
    read_frame, read_message, write_frame, write_message, ErrorCode, ProtocolMessage, MAX_FRAME_LEN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    Loopback,
    /// Bob on a thread behind a TCP listener on 127.0.0.1.
    LocalSocket,
}

#[derive(Debug, Clone)]
pub struct SessionReport {
    pub final_state: StateVector,
    pub transcript: Vec<ProtocolMessage>,
    pub angle_states_sent: u64,
}

/// A failed session, with everything exchanged before the failure.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct SessionError {
    pub error: QError,
    pub transcript: Vec<ProtocolMessage>,
}

impl SessionError {
    fn bare(error: impl Into<QError>) -> Self {
        Self {
            error: error.into(),
            transcript: Vec::new(),
        }
    }
}

fn peer_abort(reply: &ProtocolMessage) -> QError {
    match reply {
        ProtocolMessage::Error { code, detail } => {
            QError::ProtocolViolation(format!("peer aborted ({code}): {detail}"))
        }
        other => QError::ProtocolViolation(format!("unexpected {} from peer", other.type_name())),
    }
}

/// Alice's side of the conversation.
#[derive(Debug, Clone)]
pub struct AliceRun {
    pub transcript: Vec<ProtocolMessage>,
    pub angle_states_sent: u64,
}

pub fn run_alice<T: Transport + ?Sized>(
    mut alice: AliceSession,
    transport: &mut T,
) -> Result<AliceRun, SessionError> {
    let mut transcript = Vec::new();
    let mut angle_states_sent = 0;
    let mut feedback = None;
    let fail = |error, transcript: &Vec<ProtocolMessage>| SessionError {
        error,
        transcript: transcript.clone(),
    };
    loop {
        let outgoing = alice.next(feedback).map_err(|e| fail(e, &transcript))?;
        for msg in outgoing {
            if matches!(msg, ProtocolMessage::AngleQubit { .. }) {
                angle_states_sent += 1;
            }
            if let Err(e) = transport.send(&msg) {
                // an abort notice from the peer explains a failed send
                if let Ok(reply @ ProtocolMessage::Error { .. }) = transport.recv() {
                    transcript.push(reply.clone());
                    return Err(fail(peer_abort(&reply), &transcript));
                }
                return Err(fail(e, &transcript));
            }
            transcript.push(msg);
        }
        if alice.is_done() {
            return Ok(AliceRun {
                transcript,
                angle_states_sent,
            });
        }
        let reply = transport.recv().map_err(|e| fail(e, &transcript))?;
        transcript.push(reply.clone());
        feedback = match &reply {
            ProtocolMessage::Result { success } => Some(*success),
            _ => return Err(fail(peer_abort(&reply), &transcript)),
        };
    }
}

/// Runs a full session and returns Bob's final data state together with
/// Alice's transcript. Bob measures with `RandomStream::new(seed)`.
pub fn run_session(
    program: &Program,
    initial: &StateVector,
    kind: TransportKind,
    seed: u64,
) -> Result<SessionReport, SessionError> {
    run_session_with(program, initial, kind, seed, DEFAULT_MAX_ATTEMPTS)
}

pub fn run_session_with(
    program: &Program,
    initial: &StateVector,
    kind: TransportKind,
    seed: u64,
    max_attempts: u32,
) -> Result<SessionReport, SessionError> {
    let alice = AliceSession::with_max_attempts(program.clone(), max_attempts);
    match kind {
        TransportKind::Loopback => {
            let mut transport = LoopbackTransport::new(initial.clone(), seed);
            let mut run = run_alice(alice, &mut transport)?;
            while let Ok(late) = transport.recv() {
                run.transcript.push(late);
            }
            let bob = transport.into_bob();
            if *bob.phase() != BobPhase::Done {
                return Err(SessionError {
                    error: QError::ProtocolViolation(format!(
                        "peer ended in phase {:?}",
                        bob.phase()
                    )),
                    transcript: run.transcript,
                });
            }
            Ok(SessionReport {
                final_state: bob.into_data(),
                transcript: run.transcript,
                angle_states_sent: run.angle_states_sent,
            })
        }
        TransportKind::LocalSocket => {
            let listener = TcpListener::bind("127.0.0.1:0").map_err(SessionError::bare)?;
            let addr = listener.local_addr().map_err(SessionError::bare)?;
            let bob_initial = initial.clone();
            let bob = thread::spawn(move || -> crate::Result<BobOutcome> {
                let (stream, _) = listener.accept()?;
                serve_bob(stream, bob_initial, seed)
            });
            let stream = TcpStream::connect(addr).map_err(SessionError::bare)?;
            let mut transport = StreamTransport::new(stream);
            let run = run_alice(alice, &mut transport);
            // closing Alice's end unblocks Bob if the session failed
            drop(transport);
            let bob = bob.join().expect("bob thread panicked");
            // a peer abort explains any transport error Alice saw afterwards
            if let Ok(outcome) = &bob {
                if !outcome.completed {
                    return Err(SessionError {
                        error: QError::ProtocolViolation("peer aborted the session".into()),
                        transcript: outcome.transcript.clone(),
                    });
                }
            }
            let run = run?;
            let bob = bob.map_err(|error| SessionError {
                error,
                transcript: run.transcript.clone(),
            })?;
            Ok(SessionReport {
                final_state: bob.data,
                transcript: run.transcript,
                angle_states_sent: run.angle_states_sent,
            })
        }
    }
}
