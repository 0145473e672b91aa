use std::collections::VecDeque;
use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::linalg::StateVector;
use crate::rng::RandomStream;

use super::session::{BobPhase, BobSession};
use super::wire::{read_frame, read_message, write_message, ProtocolMessage};

/// Alice's end of an ordered, reliable, message-framed channel to Bob.
pub trait Transport {
    fn send(&mut self, msg: &ProtocolMessage) -> Result<()>;
    fn recv(&mut self) -> Result<ProtocolMessage>;
}

/// In-process Bob. Every message still goes through frame encoding and
/// decoding in both directions.
#[derive(Debug)]
pub struct LoopbackTransport {
    bob: BobSession,
    rng: RandomStream,
    inbox: VecDeque<Vec<u8>>,
}

impl LoopbackTransport {
    pub fn new(initial: StateVector, seed: u64) -> Self {
        Self {
            bob: BobSession::new(initial),
            rng: RandomStream::new(seed),
            inbox: VecDeque::new(),
        }
    }

    pub fn bob(&self) -> &BobSession {
        &self.bob
    }

    pub fn into_bob(self) -> BobSession {
        self.bob
    }
}

impl Transport for LoopbackTransport {
    fn send(&mut self, msg: &ProtocolMessage) -> Result<()> {
        let mut frame = Vec::new();
        write_message(&mut frame, msg)?;
        let received = read_message(&mut frame.as_slice())?;
        if let Some(reply) = self.bob.handle(&received, &mut self.rng) {
            let mut out = Vec::new();
            write_message(&mut out, &reply)?;
            self.inbox.push_back(out);
        }
        Ok(())
    }

    fn recv(&mut self) -> Result<ProtocolMessage> {
        let frame = self.inbox.pop_front().ok_or_else(|| {
            Error::Transport(io::Error::new(
                io::ErrorKind::WouldBlock,
                "peer has not replied",
            ))
        })?;
        read_message(&mut frame.as_slice())
    }
}

/// Any byte stream, typically a `TcpStream`.
#[derive(Debug)]
pub struct StreamTransport<T> {
    stream: T,
}

impl<T: Read + Write> StreamTransport<T> {
    pub fn new(stream: T) -> Self {
        Self { stream }
    }

    pub fn into_inner(self) -> T {
        self.stream
    }
}

impl<T: Read + Write> Transport for StreamTransport<T> {
    fn send(&mut self, msg: &ProtocolMessage) -> Result<()> {
        write_message(&mut self.stream, msg)
    }

    fn recv(&mut self) -> Result<ProtocolMessage> {
        read_message(&mut self.stream)
    }
}

/// What Bob ends up with after serving one session over a stream.
#[derive(Debug, Clone)]
pub struct BobOutcome {
    pub data: StateVector,
    pub transcript: Vec<ProtocolMessage>,
    pub completed: bool,
}

/// Runs Bob's side of one session on `stream` until `ProgramEnd` or abort.
pub fn serve_bob<T: Read + Write>(
    mut stream: T,
    initial: StateVector,
    seed: u64,
) -> Result<BobOutcome> {
    let mut bob = BobSession::new(initial);
    let mut rng = RandomStream::new(seed);
    let mut transcript = Vec::new();
    while !bob.is_finished() {
        let msg = read_message(&mut stream)?;
        let reply = bob.handle(&msg, &mut rng);
        transcript.push(msg);
        if let Some(reply) = reply {
            let sent = write_message(&mut stream, &reply);
            // the abort notice is best effort; Alice may already have hung up
            if *bob.phase() != BobPhase::Aborted {
                sent?;
            }
            transcript.push(reply);
        }
    }
    if *bob.phase() == BobPhase::Aborted {
        // swallow whatever Alice already sent so the abort notice is not lost
        // to a connection reset; she hangs up once she reads it
        while read_frame(&mut stream).is_ok() {}
    }
    Ok(BobOutcome {
        completed: *bob.phase() == BobPhase::Done,
        data: bob.into_data(),
        transcript,
    })
}
