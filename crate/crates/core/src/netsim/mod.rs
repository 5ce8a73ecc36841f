//! Simulated network: logical clock, public and secure channels, an
//! adversary tap, and orchestration of whole protocol runs.

mod adversary;
mod transcript;
mod world;

pub use adversary::{
    ActionOutcome, AdversaryAction, DeliveryReport, Mutation, PartyError, ReceiverVerdict,
};
pub use transcript::{
    Channel, Party, Transcript, TranscriptEntry, TranscriptError, TranscriptEvent, TRANSCRIPT_FMT,
    TRANSCRIPT_VERSION,
};
pub use world::{Ephemerals, PartyStatus, RunStatus, SessionRun, World, WorldConfig, WorldError};
