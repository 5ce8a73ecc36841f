use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::crypto::{Biometric, Block, HashAlg, HelperData, PkeKeyPair, Sigma, Timestamp};

use super::error::ProtocolError;

/// Freshness window used when none is configured.
pub const DEFAULT_DELTA: u64 = 2;

/// Knobs shared by every party in a deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub hash: HashAlg,
    /// Maximum accepted `|now - T|`, in ticks.
    pub delta: u64,
    /// Compute X_GS at the gateway as `h(T_2 || r_u || r_g || r_g || SID || B_5)`.
    /// The sensor keeps the single-r_g form, so sessions fail there.
    pub quirk_double_rg: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            hash: HashAlg::Sha256,
            delta: DEFAULT_DELTA,
            quirk_double_rg: false,
        }
    }
}

/// Sensor identity, raw UTF-8.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SensorId(pub String);

impl SensorId {
    pub fn new(s: impl Into<String>) -> Self {
        SensorId(s.into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }

    /// Block form used where SID takes part in an XOR.
    pub fn block(&self, hash: HashAlg) -> Block {
        hash.canon_block("SID", self.as_bytes())
    }
}

impl fmt::Debug for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SensorId({:?})", self.0)
    }
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// What the user types and presents at the reader.
#[derive(Clone, PartialEq, Eq)]
pub struct UserCredentials {
    pub id: String,
    pub pw: String,
    pub bio: Biometric,
}

impl UserCredentials {
    pub fn new(
        id: impl Into<String>,
        pw: impl Into<String>,
        bio: Biometric,
    ) -> Result<Self, ProtocolError> {
        let (id, pw) = (id.into(), pw.into());
        if id.is_empty() {
            return Err(ProtocolError::InvalidCredentials("empty identity"));
        }
        if pw.is_empty() {
            return Err(ProtocolError::InvalidCredentials("empty password"));
        }
        Ok(UserCredentials { id, pw, bio })
    }

    /// Same identity and biometric, different password.
    pub fn with_password(&self, pw: impl Into<String>) -> Result<Self, ProtocolError> {
        UserCredentials::new(self.id.clone(), pw, self.bio)
    }
}

impl fmt::Debug for UserCredentials {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserCredentials")
            .field("id", &self.id)
            .finish_non_exhaustive()
    }
}

/// `{HID_i, HPW_i, N}` sent to the gateway over the secure channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegRequest {
    pub hid: Block,
    pub hpw: Block,
    pub n: Block,
}

/// User-side values kept between the request and the gateway's reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingRegistration {
    pub r1: Block,
    pub n: Block,
    pub hid: Block,
    pub sigma: Sigma,
    pub tau: HelperData,
}

/// `{D_1, D_3, D_4}` returned by the gateway.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegResponse {
    pub d1: Block,
    pub d3: Block,
    pub d4: Block,
}

/// Everything the user's smart card holds after registration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmartCardStore {
    pub d1: Block,
    pub d3: Block,
    pub d4: Block,
    pub omega: Block,
    pub m: Block,
    pub tau: HelperData,
}

impl SmartCardStore {
    /// The stored Blocks with their names, in storage order.
    pub fn blocks(&self) -> [(&'static str, Block); 5] {
        [
            ("d1", self.d1),
            ("d3", self.d3),
            ("d4", self.d4),
            ("omega", self.omega),
            ("m", self.m),
        ]
    }
}

/// Gateway long-term state: its secret and the two registration tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewayState {
    pub gj: Block,
    /// HID -> D_1
    pub user_table: BTreeMap<Block, Block>,
    /// SID -> PID
    pub sensor_table: BTreeMap<SensorId, Block>,
    /// HID -> SID; deployment configuration, the wire never names the sensor.
    pub routing: BTreeMap<Block, SensorId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorRegRequest {
    pub sid: SensorId,
    pub public_key: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorRegResponse {
    pub sg: Block,
    pub l: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorState {
    pub sid: SensorId,
    pub sg: Block,
    pub l: Vec<u8>,
    pub pid: Block,
    pub keys: PkeKeyPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct M1 {
    pub hid: Block,
    pub b2: Block,
    pub x_ug: Block,
    pub t1: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct M2 {
    pub b4: Block,
    pub b5: Block,
    pub b6: Block,
    pub x_gs: Block,
    pub t2: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct M3 {
    pub b8: Block,
    pub x_sg: Block,
    pub x_su: Block,
    pub t3: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct M4 {
    pub b5: Block,
    pub b10: Block,
    pub b11: Block,
    pub x_gu: Block,
    pub x_su: Block,
    pub t4: Timestamp,
}

/// User intermediates between sending M1 and receiving M4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserSessionState {
    pub r_u: Block,
    pub b1: Block,
    pub d1: Block,
    pub hid: Block,
    pub n: Block,
    pub t1: Timestamp,
}

/// Gateway intermediates between sending M2 and receiving M3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatewaySessionState {
    pub r_u: Block,
    pub r_g: Block,
    pub d1: Block,
    pub hid: Block,
    pub sid: SensorId,
    pub b1: Block,
    pub b5: Block,
    pub t2: Timestamp,
}

/// Sensor view of a session after it has answered with M3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorSessionState {
    pub r_u: Block,
    pub r_g: Block,
    pub r_s: Block,
    pub d1: Block,
    pub sk: Block,
    pub t3: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub sk: Block,
    pub peer_confirmed: bool,
    /// Transcript sequence numbers of the messages this party sent or received.
    pub transcript_ids: Vec<u64>,
}

impl SessionOutcome {
    pub(crate) fn confirmed(sk: Block) -> Self {
        SessionOutcome {
            sk,
            peer_confirmed: true,
            transcript_ids: Vec::new(),
        }
    }
}
