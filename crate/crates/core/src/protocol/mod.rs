//! Party state machines for registration and the authenticated key agreement.

mod auth;
mod error;
mod registration;
mod types;
pub mod wire;

pub use auth::{check_fresh, derive_sk, unlock_card, user_login, user_process_m4, UnlockedCard};
pub use error::{Check, ProtocolError};
pub use registration::{
    sensor_finalize_registration, user_finalize_registration, user_register_request,
};
pub use types::*;
pub use wire::{DecodeError, Message, MessageKind};
