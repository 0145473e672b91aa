//! Wire format.
//!
//! Each frame is a 4-byte big-endian payload length followed by a UTF-8 JSON
//! object tagged by `"type"`:
//!
//! ```text
//! {"type":"begin","n":3}
//! {"type":"command","c0":0,"c":"101"}
//! {"type":"angle","re0":8.6602540378443860e-1,"im0":0.0000000000000000e0,...}
//! {"type":"result","success":true}
//! {"type":"end"}
//! {"type":"error","code":"out_of_phase","detail":"..."}
//! ```
//!
//! Angle amplitudes are written with 17 significant digits so they decode to
//! the same `f64`.

use std::fmt;
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::codec::CommandWord;
use crate::error::{Error, Result};
use crate::linalg::Amplitude;

/// Frames larger than this are rejected before allocation.
pub const MAX_FRAME_LEN: u32 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    OutOfPhase,
    InvalidAngle,
    InvalidCommand,
    Dimension,
    Malformed,
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        write!(f, "{}", s.as_str().expect("string tag"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolMessage {
    ProgramBegin { n: usize },
    Command { word: CommandWord },
    AngleQubit { amp0: Amplitude, amp1: Amplitude },
    Result { success: bool },
    ProgramEnd,
    Error { code: ErrorCode, detail: String },
}

impl ProtocolMessage {
    pub fn type_name(&self) -> &'static str {
        match self {
            Self::ProgramBegin { .. } => "begin",
            Self::Command { .. } => "command",
            Self::AngleQubit { .. } => "angle",
            Self::Result { .. } => "result",
            Self::ProgramEnd => "end",
            Self::Error { .. } => "error",
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            Self::ProgramBegin { n } => format!(r#"{{"type":"begin","n":{n}}}"#),
            Self::Command { word } => format!(
                r#"{{"type":"command","c0":{},"c":"{}"}}"#,
                u8::from(word.c0()),
                word.data_bit_string()
            ),
            Self::AngleQubit { amp0, amp1 } => format!(
                r#"{{"type":"angle","re0":{:.16e},"im0":{:.16e},"re1":{:.16e},"im1":{:.16e}}}"#,
                amp0.re, amp0.im, amp1.re, amp1.im
            ),
            Self::Result { success } => format!(r#"{{"type":"result","success":{success}}}"#),
            Self::ProgramEnd => r#"{"type":"end"}"#.to_string(),
            Self::Error { code, detail } => format!(
                r#"{{"type":"error","code":"{code}","detail":{}}}"#,
                serde_json::to_string(detail).expect("string serializes")
            ),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawMessage =
            serde_json::from_str(text).map_err(|e| Error::Frame(format!("{e}: {text}")))?;
        Ok(match raw {
            RawMessage::Begin { n } => Self::ProgramBegin { n },
            RawMessage::Command { c0, c } => {
                let c0 = match c0 {
                    0 => false,
                    1 => true,
                    other => return Err(Error::Frame(format!("c0 must be 0 or 1, got {other}"))),
                };
                Self::Command {
                    word: CommandWord::parse_data_bits(c0, &c)?,
                }
            }
            RawMessage::Angle { re0, im0, re1, im1 } => Self::AngleQubit {
                amp0: Complex64::new(re0, im0),
                amp1: Complex64::new(re1, im1),
            },
            RawMessage::Result { success } => Self::Result { success },
            RawMessage::End {} => Self::ProgramEnd,
            RawMessage::Error { code, detail } => Self::Error { code, detail },
        })
    }
}

impl fmt::Display for ProtocolMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json())
    }
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawMessage {
    Begin {
        n: usize,
    },
    Command {
        c0: u8,
        c: String,
    },
    Angle {
        re0: f64,
        im0: f64,
        re1: f64,
        im1: f64,
    },
    Result {
        success: bool,
    },
    End {},
    Error {
        code: ErrorCode,
        detail: String,
    },
}

pub fn write_frame<W: Write + ?Sized>(w: &mut W, payload: &[u8]) -> Result<()> {
    let len = u32::try_from(payload.len())
        .ok()
        .filter(|&l| l <= MAX_FRAME_LEN)
        .ok_or_else(|| Error::Frame(format!("payload of {} bytes too large", payload.len())))?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

pub fn read_frame<R: Read + ?Sized>(r: &mut R) -> Result<Vec<u8>> {
    let mut header = [0u8; 4];
    r.read_exact(&mut header)?;
    let len = u32::from_be_bytes(header);
    if len > MAX_FRAME_LEN {
        return Err(Error::Frame(format!(
            "declared length {len} exceeds {MAX_FRAME_LEN}"
        )));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn write_message<W: Write + ?Sized>(w: &mut W, msg: &ProtocolMessage) -> Result<()> {
    write_frame(w, msg.to_json().as_bytes())
}

pub fn read_message<R: Read + ?Sized>(r: &mut R) -> Result<ProtocolMessage> {
    let frame = read_frame(r)?;
    let text = std::str::from_utf8(&frame).map_err(|e| Error::Frame(e.to_string()))?;
    ProtocolMessage::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    #[test]
    fn framing_is_big_endian_length_prefix() {
        let mut buf = Vec::new();
        write_frame(&mut buf, b"hello").unwrap();
        assert_eq!(buf, [0, 0, 0, 5, b'h', b'e', b'l', b'l', b'o']);
        assert_eq!(read_frame(&mut Cursor::new(buf)).unwrap(), b"hello");
    }

    #[test]
    fn exact_payloads() {
        let word = CommandWord::parse("01001").unwrap();
        assert_eq!(
            ProtocolMessage::Command { word }.to_json(),
            r#"{"type":"command","c0":0,"c":"1001"}"#
        );
        assert_eq!(
            ProtocolMessage::Result { success: false }.to_json(),
            r#"{"type":"result","success":false}"#
        );
        assert_eq!(ProtocolMessage::ProgramEnd.to_json(), r#"{"type":"end"}"#);
        assert_eq!(
            ProtocolMessage::ProgramBegin { n: 3 }.to_json(),
            r#"{"type":"begin","n":3}"#
        );
        let angle = ProtocolMessage::AngleQubit {
            amp0: Complex64::new(0.5, 0.0),
            amp1: Complex64::new(0.0, -0.1),
        };
        assert_eq!(
            angle.to_json(),
            r#"{"type":"angle","re0":5.0000000000000000e-1,"im0":0.0000000000000000e0,"re1":0.0000000000000000e0,"im1":-1.0000000000000001e-1}"#
        );
    }

    #[test]
    fn error_detail_is_escaped() {
        let msg = ProtocolMessage::Error {
            code: ErrorCode::OutOfPhase,
            detail: "quote \" and\nnewline".into(),
        };
        let json = msg.to_json();
        assert!(json.contains(r#""code":"out_of_phase""#));
        assert_eq!(ProtocolMessage::from_json(&json).unwrap(), msg);
    }

    #[test]
    fn rejects_malformed() {
        assert!(ProtocolMessage::from_json(r#"{"type":"nope"}"#).is_err());
        assert!(ProtocolMessage::from_json(r#"{"type":"command","c0":2,"c":"1"}"#).is_err());
        assert!(ProtocolMessage::from_json(r#"{"type":"command","c0":0,"c":"1x"}"#).is_err());
        assert!(ProtocolMessage::from_json(r#"{"type":"end","extra":1}"#).is_err());
        assert!(ProtocolMessage::from_json("not json").is_err());
    }

    #[test]
    fn oversized_and_truncated_frames() {
        let mut buf = (MAX_FRAME_LEN + 1).to_be_bytes().to_vec();
        buf.extend([0; 8]);
        assert!(matches!(
            read_frame(&mut Cursor::new(buf)),
            Err(Error::Frame(_))
        ));
        let truncated = vec![0, 0, 0, 9, b'x'];
        assert!(matches!(
            read_frame(&mut Cursor::new(truncated)),
            Err(Error::Transport(_))
        ));
    }

    proptest! {
        #[test]
        fn angle_floats_roundtrip_exactly(
            re0 in -1.0f64..1.0, im0 in -1.0f64..1.0, re1 in -1.0f64..1.0, im1 in -1.0f64..1.0,
        ) {
            let msg = ProtocolMessage::AngleQubit {
                amp0: Complex64::new(re0, im0),
                amp1: Complex64::new(re1, im1),
            };
            let mut buf = Vec::new();
            write_message(&mut buf, &msg).unwrap();
            prop_assert_eq!(read_message(&mut Cursor::new(buf)).unwrap(), msg);
        }

        #[test]
        fn command_words_roundtrip(c0 in any::<bool>(), bits in proptest::collection::vec(any::<bool>(), 1..12)) {
            let msg = ProtocolMessage::Command { word: CommandWord::new(c0, bits).unwrap() };
            prop_assert_eq!(ProtocolMessage::from_json(&msg.to_json()).unwrap(), msg);
        }
    }
}
