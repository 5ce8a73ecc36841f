use std::fmt;

use crate::crypto::{PkeError, Timestamp};

use super::wire::MessageKind;

/// The authenticator comparisons performed during a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Check {
    /// Smart-card check `M' ?= M` at the user device.
    CardM,
    XUg,
    XGs,
    XSg,
    XGu,
    XSu,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::CardM => "M",
            Check::XUg => "X_UG",
            Check::XGs => "X_GS",
            Check::XSg => "X_SG",
            Check::XGu => "X_GU",
            Check::XSu => "X_SU",
        }
    }

    /// Party performing the check.
    pub fn verifier(self) -> &'static str {
        match self {
            Check::CardM | Check::XGu | Check::XSu => "user",
            Check::XUg | Check::XSg => "gateway",
            Check::XGs => "sensor",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProtocolError {
    #[error("local authentication failed: M check mismatch at user")]
    LocalAuthFailed,
    #[error("stale timestamp on {message}: {timestamp} outside window {delta} at {now}")]
    StaleTimestamp {
        message: MessageKind,
        timestamp: Timestamp,
        now: Timestamp,
        delta: u64,
    },
    #[error("unknown HID at gateway")]
    UnknownHid,
    #[error("no sensor route for HID at gateway")]
    NoRoute,
    #[error("unknown sensor `{0}`")]
    UnknownSensor(String),
    #[error("{} mismatch at {}", .0.name(), .0.verifier())]
    AuthenticatorMismatch(Check),
    #[error("gateway authentication failed: X_GU mismatch at user")]
    GatewayAuthFailed,
    #[error("sensor authentication failed: X_SU mismatch at user")]
    SensorAuthFailed,
    #[error("registration rejected: {0}")]
    RegistrationRejected(String),
    #[error("sensor registration finalize failed: {0}")]
    FinalizeFailed(PkeError),
    #[error("invalid credentials: {0}")]
    InvalidCredentials(&'static str),
}

impl ProtocolError {
    /// The authenticator that failed, if this is an authenticator failure.
    pub fn failed_check(&self) -> Option<Check> {
        match self {
            ProtocolError::LocalAuthFailed => Some(Check::CardM),
            ProtocolError::AuthenticatorMismatch(c) => Some(*c),
            ProtocolError::GatewayAuthFailed => Some(Check::XGu),
            ProtocolError::SensorAuthFailed => Some(Check::XSu),
            _ => None,
        }
    }

    pub fn is_stale(&self) -> bool {
        matches!(self, ProtocolError::StaleTimestamp { .. })
    }
}
