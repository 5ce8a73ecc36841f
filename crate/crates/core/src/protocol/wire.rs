//! Binary frames for every message of the scheme.
//!
//! One tag byte, then the fields in protocol order: blocks as 32 raw bytes,
//! timestamps as 8 bytes big-endian, and variable-length fields (SID, public
//! key, L) behind a 2-byte big-endian length prefix.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crypto::{Block, Timestamp, BLOCK_LEN};

use super::types::{
    RegRequest, RegResponse, SensorId, SensorRegRequest, SensorRegResponse, M1, M2, M3, M4,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageKind {
    M1,
    M2,
    M3,
    M4,
    #[serde(rename = "user-reg-request")]
    UserRegRequest,
    #[serde(rename = "user-reg-response")]
    UserRegResponse,
    #[serde(rename = "sensor-reg-request")]
    SensorRegRequest,
    #[serde(rename = "sensor-reg-response")]
    SensorRegResponse,
}

impl MessageKind {
    pub const AUTH: [MessageKind; 4] = [
        MessageKind::M1,
        MessageKind::M2,
        MessageKind::M3,
        MessageKind::M4,
    ];

    pub fn tag(self) -> u8 {
        match self {
            MessageKind::M1 => 0x01,
            MessageKind::M2 => 0x02,
            MessageKind::M3 => 0x03,
            MessageKind::M4 => 0x04,
            MessageKind::UserRegRequest => 0x10,
            MessageKind::UserRegResponse => 0x11,
            MessageKind::SensorRegRequest => 0x12,
            MessageKind::SensorRegResponse => 0x13,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0x01 => MessageKind::M1,
            0x02 => MessageKind::M2,
            0x03 => MessageKind::M3,
            0x04 => MessageKind::M4,
            0x10 => MessageKind::UserRegRequest,
            0x11 => MessageKind::UserRegResponse,
            0x12 => MessageKind::SensorRegRequest,
            0x13 => MessageKind::SensorRegResponse,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::M1 => "M1",
            MessageKind::M2 => "M2",
            MessageKind::M3 => "M3",
            MessageKind::M4 => "M4",
            MessageKind::UserRegRequest => "user-reg-request",
            MessageKind::UserRegResponse => "user-reg-response",
            MessageKind::SensorRegRequest => "sensor-reg-request",
            MessageKind::SensorRegResponse => "sensor-reg-response",
        }
    }

    /// Names of the 32-byte fields, in frame order. They sit right after the tag.
    pub fn block_fields(self) -> &'static [&'static str] {
        match self {
            MessageKind::M1 => &["hid", "b2", "x_ug"],
            MessageKind::M2 => &["b4", "b5", "b6", "x_gs"],
            MessageKind::M3 => &["b8", "x_sg", "x_su"],
            MessageKind::M4 => &["b5", "b10", "b11", "x_gu", "x_su"],
            MessageKind::UserRegRequest => &["hid", "hpw", "n"],
            MessageKind::UserRegResponse => &["d1", "d3", "d4"],
            MessageKind::SensorRegRequest => &[],
            MessageKind::SensorRegResponse => &["sg"],
        }
    }

    /// Byte offset of a block field inside the encoded frame.
    pub fn field_offset(self, field: &str) -> Option<usize> {
        self.block_fields()
            .iter()
            .position(|f| *f == field)
            .map(|i| 1 + i * BLOCK_LEN)
    }

    /// Byte offset of the timestamp of an authentication message.
    pub fn timestamp_offset(self) -> Option<usize> {
        match self {
            MessageKind::M1 | MessageKind::M2 | MessageKind::M3 | MessageKind::M4 => {
                Some(1 + self.block_fields().len() * BLOCK_LEN)
            }
            _ => None,
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MessageKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            MessageKind::M1,
            MessageKind::M2,
            MessageKind::M3,
            MessageKind::M4,
            MessageKind::UserRegRequest,
            MessageKind::UserRegResponse,
            MessageKind::SensorRegRequest,
            MessageKind::SensorRegResponse,
        ]
        .into_iter()
        .find(|k| k.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown message kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    M1(M1),
    M2(M2),
    M3(M3),
    M4(M4),
    UserRegRequest(RegRequest),
    UserRegResponse(RegResponse),
    SensorRegRequest(SensorRegRequest),
    SensorRegResponse(SensorRegResponse),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("empty frame")]
    Empty,
    #[error("unknown tag 0x{0:02x}")]
    UnknownTag(u8),
    #[error("{kind} frame truncated")]
    Truncated { kind: MessageKind },
    #[error("{kind} frame has {extra} trailing bytes")]
    TrailingBytes { kind: MessageKind, extra: usize },
    #[error("{kind} timestamp must be positive")]
    ZeroTimestamp { kind: MessageKind },
    #[error("{kind} identity is not valid UTF-8")]
    InvalidUtf8 { kind: MessageKind },
    #[error("{kind} variable-length field exceeds 65535 bytes")]
    FieldTooLong { kind: MessageKind },
}

struct Writer(Vec<u8>);

impl Writer {
    fn new(kind: MessageKind) -> Self {
        Writer(vec![kind.tag()])
    }

    fn block(mut self, b: &Block) -> Self {
        self.0.extend_from_slice(&b.0);
        self
    }

    fn ts(mut self, t: Timestamp) -> Self {
        self.0.extend_from_slice(&t.to_be_bytes());
        self
    }

    fn var(mut self, bytes: &[u8]) -> Self {
        let len = u16::try_from(bytes.len()).expect("variable field length checked by caller");
        self.0.extend_from_slice(&len.to_be_bytes());
        self.0.extend_from_slice(bytes);
        self
    }
}

struct Reader<'a> {
    kind: MessageKind,
    rest: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.rest.len() < n {
            return Err(DecodeError::Truncated { kind: self.kind });
        }
        let (head, tail) = self.rest.split_at(n);
        self.rest = tail;
        Ok(head)
    }

    fn block(&mut self) -> Result<Block, DecodeError> {
        Ok(Block::from_slice(self.take(BLOCK_LEN)?).expect("exact length"))
    }

    fn ts(&mut self) -> Result<Timestamp, DecodeError> {
        let raw: [u8; 8] = self.take(8)?.try_into().expect("exact length");
        match u64::from_be_bytes(raw) {
            0 => Err(DecodeError::ZeroTimestamp { kind: self.kind }),
            t => Ok(Timestamp(t)),
        }
    }

    fn var(&mut self) -> Result<&'a [u8], DecodeError> {
        let len: [u8; 2] = self.take(2)?.try_into().expect("exact length");
        self.take(u16::from_be_bytes(len) as usize)
    }

    fn finish(self) -> Result<(), DecodeError> {
        match self.rest.len() {
            0 => Ok(()),
            extra => Err(DecodeError::TrailingBytes {
                kind: self.kind,
                extra,
            }),
        }
    }
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::M1(_) => MessageKind::M1,
            Message::M2(_) => MessageKind::M2,
            Message::M3(_) => MessageKind::M3,
            Message::M4(_) => MessageKind::M4,
            Message::UserRegRequest(_) => MessageKind::UserRegRequest,
            Message::UserRegResponse(_) => MessageKind::UserRegResponse,
            Message::SensorRegRequest(_) => MessageKind::SensorRegRequest,
            Message::SensorRegResponse(_) => MessageKind::SensorRegResponse,
        }
    }

    /// Timestamp carried by an authentication message.
    pub fn timestamp(&self) -> Option<Timestamp> {
        match self {
            Message::M1(m) => Some(m.t1),
            Message::M2(m) => Some(m.t2),
            Message::M3(m) => Some(m.t3),
            Message::M4(m) => Some(m.t4),
            _ => None,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, DecodeError> {
        let kind = self.kind();
        let w = Writer::new(kind);
        let w = match self {
            Message::M1(m) => w.block(&m.hid).block(&m.b2).block(&m.x_ug).ts(m.t1),
            Message::M2(m) => w
                .block(&m.b4)
                .block(&m.b5)
                .block(&m.b6)
                .block(&m.x_gs)
                .ts(m.t2),
            Message::M3(m) => w.block(&m.b8).block(&m.x_sg).block(&m.x_su).ts(m.t3),
            Message::M4(m) => w
                .block(&m.b5)
                .block(&m.b10)
                .block(&m.b11)
                .block(&m.x_gu)
                .block(&m.x_su)
                .ts(m.t4),
            Message::UserRegRequest(r) => w.block(&r.hid).block(&r.hpw).block(&r.n),
            Message::UserRegResponse(r) => w.block(&r.d1).block(&r.d3).block(&r.d4),
            Message::SensorRegRequest(r) => {
                if r.sid.as_bytes().len() > u16::MAX as usize
                    || r.public_key.len() > u16::MAX as usize
                {
                    return Err(DecodeError::FieldTooLong { kind });
                }
                w.var(r.sid.as_bytes()).var(&r.public_key)
            }
            Message::SensorRegResponse(r) => {
                if r.l.len() > u16::MAX as usize {
                    return Err(DecodeError::FieldTooLong { kind });
                }
                w.block(&r.sg).var(&r.l)
            }
        };
        Ok(w.0)
    }

    pub fn decode(frame: &[u8]) -> Result<Message, DecodeError> {
        let (&tag, rest) = frame.split_first().ok_or(DecodeError::Empty)?;
        let kind = MessageKind::from_tag(tag).ok_or(DecodeError::UnknownTag(tag))?;
        let mut r = Reader { kind, rest };
        let msg = match kind {
            MessageKind::M1 => Message::M1(M1 {
                hid: r.block()?,
                b2: r.block()?,
                x_ug: r.block()?,
                t1: r.ts()?,
            }),
            MessageKind::M2 => Message::M2(M2 {
                b4: r.block()?,
                b5: r.block()?,
                b6: r.block()?,
                x_gs: r.block()?,
                t2: r.ts()?,
            }),
            MessageKind::M3 => Message::M3(M3 {
                b8: r.block()?,
                x_sg: r.block()?,
                x_su: r.block()?,
                t3: r.ts()?,
            }),
            MessageKind::M4 => Message::M4(M4 {
                b5: r.block()?,
                b10: r.block()?,
                b11: r.block()?,
                x_gu: r.block()?,
                x_su: r.block()?,
                t4: r.ts()?,
            }),
            MessageKind::UserRegRequest => Message::UserRegRequest(RegRequest {
                hid: r.block()?,
                hpw: r.block()?,
                n: r.block()?,
            }),
            MessageKind::UserRegResponse => Message::UserRegResponse(RegResponse {
                d1: r.block()?,
                d3: r.block()?,
                d4: r.block()?,
            }),
            MessageKind::SensorRegRequest => {
                let sid = std::str::from_utf8(r.var()?)
                    .map_err(|_| DecodeError::InvalidUtf8 { kind })?
                    .to_string();
                Message::SensorRegRequest(SensorRegRequest {
                    sid: SensorId(sid),
                    public_key: r.var()?.to_vec(),
                })
            }
            MessageKind::SensorRegResponse => Message::SensorRegResponse(SensorRegResponse {
                sg: r.block()?,
                l: r.var()?.to_vec(),
            }),
        };
        r.finish()?;
        Ok(msg)
    }
}

/// Flip one bit inside a named block field of an encoded frame.
pub fn flip_field_bit(frame: &mut [u8], kind: MessageKind, field: &str, bit: usize) -> Option<()> {
    let offset = kind.field_offset(field)?;
    let byte = offset + (bit / 8) % BLOCK_LEN;
    *frame.get_mut(byte)? ^= 0x80 >> (bit % 8);
    Some(())
}
