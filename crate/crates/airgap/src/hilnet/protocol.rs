//! Wire format for remote inference.
//!
//! ```text
//! frame   := magic "ALRN" | version u8 (=1) | type u8 | payload_len u32 LE | payload
//! PING 0  := arbitrary bytes, echoed back verbatim
//! OBS  1  := count u16 LE | count x f32 LE   (depth ‖ velocity ‖ goal)
//! ACT  2  := kind u8 (0 discrete, 1 continuous)
//!            | id u16 LE            (discrete)
//!            | a0 f32 LE | a1 f32 LE (continuous)
//!            | t2 u64 LE nanoseconds of server compute
//! LOAD 3  := checkpoint file bytes; acknowledged with an empty LOAD frame
//! ERR  4  := code u8 | UTF-8 reason
//! ```

use std::io::{self, Read, Write};

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"ALRN";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 10;
/// Frames larger than this are refused without reading the payload.
pub const MAX_PAYLOAD: u32 = 64 << 20;

pub const PING: u8 = 0;
pub const OBS: u8 = 1;
pub const ACT: u8 = 2;
pub const LOAD_CKPT: u8 = 3;
pub const ERR: u8 = 4;

/// Reason codes carried by ERR frames.
pub mod code {
    pub const MALFORMED: u8 = 1;
    pub const UNKNOWN_TYPE: u8 = 2;
    pub const INPUT_SIZE: u8 = 3;
    pub const NO_CHECKPOINT: u8 = 4;
    pub const BAD_CHECKPOINT: u8 = 5;
    pub const VERSION: u8 = 6;
    pub const UNEXPECTED: u8 = 7;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WireAction {
    Discrete(u16),
    Continuous([f32; 2]),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Ping(Vec<u8>),
    Obs(Vec<f32>),
    Act { action: WireAction, t2_ns: u64 },
    LoadCkpt(Vec<u8>),
    Err { code: u8, reason: String },
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported protocol version {0}")]
    Version(u8),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("malformed payload: {0}")]
    Malformed(&'static str),
    #[error("payload of {0} bytes exceeds limit")]
    TooLarge(u32),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ProtocolError {
    pub fn code(&self) -> u8 {
        match self {
            ProtocolError::Version(_) => code::VERSION,
            ProtocolError::UnknownType(_) => code::UNKNOWN_TYPE,
            _ => code::MALFORMED,
        }
    }
}

impl Message {
    pub fn msg_type(&self) -> u8 {
        match self {
            Message::Ping(_) => PING,
            Message::Obs(_) => OBS,
            Message::Act { .. } => ACT,
            Message::LoadCkpt(_) => LOAD_CKPT,
            Message::Err { .. } => ERR,
        }
    }

    fn payload(&self) -> Vec<u8> {
        match self {
            Message::Ping(b) | Message::LoadCkpt(b) => b.clone(),
            Message::Obs(v) => {
                let mut p = Vec::with_capacity(2 + 4 * v.len());
                p.extend_from_slice(&(v.len() as u16).to_le_bytes());
                for x in v {
                    p.extend_from_slice(&x.to_le_bytes());
                }
                p
            }
            Message::Act { action, t2_ns } => {
                let mut p = Vec::with_capacity(17);
                match action {
                    WireAction::Discrete(id) => {
                        p.push(0);
                        p.extend_from_slice(&id.to_le_bytes());
                    }
                    WireAction::Continuous(a) => {
                        p.push(1);
                        p.extend_from_slice(&a[0].to_le_bytes());
                        p.extend_from_slice(&a[1].to_le_bytes());
                    }
                }
                p.extend_from_slice(&t2_ns.to_le_bytes());
                p
            }
            Message::Err { code, reason } => {
                let mut p = vec![*code];
                p.extend_from_slice(reason.as_bytes());
                p
            }
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let payload = self.payload();
        let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.msg_type());
        out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&payload);
        out
    }

    pub fn decode_payload(msg_type: u8, p: &[u8]) -> Result<Message, ProtocolError> {
        let f32_at = |i: usize| f32::from_le_bytes(p[i..i + 4].try_into().expect("4 bytes"));
        match msg_type {
            PING => Ok(Message::Ping(p.to_vec())),
            LOAD_CKPT => Ok(Message::LoadCkpt(p.to_vec())),
            OBS => {
                if p.len() < 2 {
                    return Err(ProtocolError::Malformed("observation count missing"));
                }
                let n = u16::from_le_bytes([p[0], p[1]]) as usize;
                if p.len() != 2 + 4 * n {
                    return Err(ProtocolError::Malformed("observation count disagrees with payload length"));
                }
                Ok(Message::Obs((0..n).map(|i| f32_at(2 + 4 * i)).collect()))
            }
            ACT => {
                let (action, rest) = match p.first() {
                    Some(0) if p.len() == 1 + 2 + 8 => (WireAction::Discrete(u16::from_le_bytes([p[1], p[2]])), 3),
                    Some(1) if p.len() == 1 + 8 + 8 => (WireAction::Continuous([f32_at(1), f32_at(5)]), 9),
                    Some(0 | 1) => return Err(ProtocolError::Malformed("action payload length")),
                    _ => return Err(ProtocolError::Malformed("unknown action kind")),
                };
                let t2_ns = u64::from_le_bytes(p[rest..rest + 8].try_into().expect("8 bytes"));
                Ok(Message::Act { action, t2_ns })
            }
            ERR => {
                let code = *p.first().ok_or(ProtocolError::Malformed("error code missing"))?;
                let reason = String::from_utf8_lossy(&p[1..]).into_owned();
                Ok(Message::Err { code, reason })
            }
            t => Err(ProtocolError::UnknownType(t)),
        }
    }

    pub fn decode(frame: &[u8]) -> Result<Message, ProtocolError> {
        if frame.len() < HEADER_LEN {
            return Err(ProtocolError::Malformed("short header"));
        }
        let h = parse_header(frame[..HEADER_LEN].try_into().expect("header"))?;
        if frame.len() - HEADER_LEN != h.payload_len as usize {
            return Err(ProtocolError::Malformed("payload length mismatch"));
        }
        Message::decode_payload(h.msg_type, &frame[HEADER_LEN..])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub msg_type: u8,
    pub payload_len: u32,
}

pub fn parse_header(h: &[u8; HEADER_LEN]) -> Result<Header, ProtocolError> {
    if &h[..4] != MAGIC {
        return Err(ProtocolError::BadMagic);
    }
    if h[4] != VERSION {
        return Err(ProtocolError::Version(h[4]));
    }
    Ok(Header {
        msg_type: h[5],
        payload_len: u32::from_le_bytes(h[6..10].try_into().expect("4 bytes")),
    })
}

pub fn write_message<W: Write>(w: &mut W, m: &Message) -> io::Result<()> {
    w.write_all(&m.encode())?;
    w.flush()
}

/// Reads one frame. Framing errors after a complete header leave the
/// stream positioned at the next frame, so the caller can answer with ERR
/// and keep the connection.
pub fn read_message<R: Read>(r: &mut R) -> Result<Message, ProtocolError> {
    let mut h = [0u8; HEADER_LEN];
    r.read_exact(&mut h)?;
    let len = u32::from_le_bytes(h[6..10].try_into().expect("4 bytes"));
    if len > MAX_PAYLOAD {
        return Err(ProtocolError::TooLarge(len));
    }
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    let header = parse_header(&h)?;
    Message::decode_payload(header.msg_type, &payload)
}
