use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::protocol::{Message, SensorId};

pub const TRANSCRIPT_FMT: &str = "akap-transcript";
pub const TRANSCRIPT_VERSION: u32 = 1;

/// A participant address on the simulated network.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    User(String),
    Gateway,
    Sensor(SensorId),
    Adversary,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::User(id) => write!(f, "user:{id}"),
            Party::Gateway => f.write_str("gateway"),
            Party::Sensor(sid) => write!(f, "sensor:{sid}"),
            Party::Adversary => f.write_str("adversary"),
        }
    }
}

impl FromStr for Party {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gateway" => Ok(Party::Gateway),
            "adversary" => Ok(Party::Adversary),
            _ => {
                if let Some(id) = s.strip_prefix("user:") {
                    Ok(Party::User(id.to_string()))
                } else if let Some(sid) = s.strip_prefix("sensor:") {
                    Ok(Party::Sensor(SensorId::new(sid)))
                } else {
                    Err(format!("unknown party `{s}`"))
                }
            }
        }
    }
}

impl Serialize for Party {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Party {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// Readable and writable by the adversary.
    Public,
    /// Confidential and authentic; never shown to the adversary.
    Secure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub tick: u64,
    pub channel: Channel,
    pub sender: Party,
    pub receiver: Party,
    #[serde(rename = "payload_hex", with = "hex::serde")]
    pub payload: Vec<u8>,
}

impl TranscriptEntry {
    pub fn decode(&self) -> Result<Message, crate::protocol::DecodeError> {
        Message::decode(&self.payload)
    }
}

/// Oracle use recorded alongside the traffic, so each attack's assumptions stay visible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub kind: String,
    pub tick: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
    events: Vec<TranscriptEvent>,
}

#[derive(Serialize, Deserialize)]
struct TranscriptFile {
    fmt: String,
    v: u32,
    entries: Vec<TranscriptEntry>,
    #[serde(default)]
    events: Vec<TranscriptEvent>,
}

#[derive(Debug, thiserror::Error)]
pub enum TranscriptError {
    #[error("transcript JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a transcript file (fmt = `{0}`)")]
    WrongFormat(String),
    #[error("unsupported transcript version {0}")]
    UnknownVersion(u32),
    #[error("sequence numbers must strictly increase (entry {0})")]
    SeqOrder(u64),
    #[error("ticks must not decrease (entry {0})")]
    TickOrder(u64),
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn events(&self) -> &[TranscriptEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, seq: u64) -> Option<&TranscriptEntry> {
        self.entries.iter().find(|e| e.seq == seq)
    }

    pub(crate) fn record(
        &mut self,
        tick: u64,
        channel: Channel,
        sender: Party,
        receiver: Party,
        payload: Vec<u8>,
    ) -> u64 {
        let seq = self.entries.last().map_or(0, |e| e.seq + 1);
        self.entries.push(TranscriptEntry {
            seq,
            tick,
            channel,
            sender,
            receiver,
            payload,
        });
        seq
    }

    pub(crate) fn note(&mut self, event: TranscriptEvent) {
        self.events.push(event);
    }

    /// Public entries only, in order: what the adversary sees.
    pub fn public_view(&self) -> Vec<TranscriptEntry> {
        self.entries
            .iter()
            .filter(|e| e.channel == Channel::Public)
            .cloned()
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = TranscriptFile {
            fmt: TRANSCRIPT_FMT.into(),
            v: TRANSCRIPT_VERSION,
            entries: self.entries.clone(),
            events: self.events.clone(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("transcript serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, TranscriptError> {
        let file: TranscriptFile = serde_json::from_str(text)?;
        if file.fmt != TRANSCRIPT_FMT {
            return Err(TranscriptError::WrongFormat(file.fmt));
        }
        if file.v != TRANSCRIPT_VERSION {
            return Err(TranscriptError::UnknownVersion(file.v));
        }
        for pair in file.entries.windows(2) {
            if pair[1].seq <= pair[0].seq {
                return Err(TranscriptError::SeqOrder(pair[1].seq));
            }
            if pair[1].tick < pair[0].tick {
                return Err(TranscriptError::TickOrder(pair[1].seq));
            }
        }
        Ok(Transcript {
            entries: file.entries,
            events: file.events,
        })
    }
}
