use serde::{Deserialize, Serialize};

use crate::protocol::wire::flip_field_bit;
use crate::protocol::{DecodeError, MessageKind, ProtocolError};

use super::transcript::{Party, TranscriptEntry};

/// A change the adversary applies to a frame in flight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mutation {
    /// Flip bit `bit` (MSB-first) of the named 32-byte field.
    FlipFieldBit { field: String, bit: usize },
    /// Flip an arbitrary bit of the encoded frame.
    FlipFrameBit { bit: usize },
    /// Deliver these bytes instead.
    Replace(Vec<u8>),
}

impl Mutation {
    pub fn apply(&self, kind: MessageKind, frame: &[u8]) -> Result<Vec<u8>, String> {
        let mut out = frame.to_vec();
        match self {
            Mutation::FlipFieldBit { field, bit } => {
                flip_field_bit(&mut out, kind, field, *bit)
                    .ok_or_else(|| format!("{kind} has no block field `{field}`"))?;
            }
            Mutation::FlipFrameBit { bit } => {
                let byte = out
                    .get_mut(bit / 8)
                    .ok_or_else(|| format!("bit {bit} is beyond the {kind} frame"))?;
                *byte ^= 0x80 >> (bit % 8);
            }
            Mutation::Replace(bytes) => out = bytes.clone(),
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdversaryAction {
    /// Read the public channel.
    Observe,
    /// Drop the next message of this kind.
    Drop { message: MessageKind },
    /// Alter the next message of this kind before it is delivered.
    Modify {
        message: MessageKind,
        mutation: Mutation,
    },
    /// Deliver a frame of the adversary's choosing right now.
    Inject { receiver: Party, frame: Vec<u8> },
    /// Wait `wait` ticks, then resend a recorded public frame to its original receiver.
    Replay { seq: u64, wait: u64 },
}

/// How a receiver treated a delivered frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReceiverVerdict {
    Accepted,
    RejectedStale,
    RejectedAuthenticator,
    RejectedOther,
    DecodeError,
    NoResponse,
}

/// Why a party refused a delivery.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PartyError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("decode error: {0}")]
    Decode(#[from] DecodeError),
    #[error("no open session for {0}")]
    NoSession(MessageKind),
    #[error("{receiver} does not accept {message}")]
    Unexpected {
        receiver: String,
        message: MessageKind,
    },
}

impl PartyError {
    pub fn verdict(&self) -> ReceiverVerdict {
        match self {
            PartyError::Protocol(e) if e.is_stale() => ReceiverVerdict::RejectedStale,
            PartyError::Protocol(e) if e.failed_check().is_some() => {
                ReceiverVerdict::RejectedAuthenticator
            }
            PartyError::Decode(_) => ReceiverVerdict::DecodeError,
            _ => ReceiverVerdict::RejectedOther,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeliveryReport {
    pub seq: u64,
    pub tick: u64,
    pub receiver: Party,
    pub message: Option<MessageKind>,
    pub verdict: ReceiverVerdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ActionOutcome {
    Observed(Vec<TranscriptEntry>),
    /// Interception registered; it fires on the next matching send.
    Armed,
    Delivered(DeliveryReport),
}
