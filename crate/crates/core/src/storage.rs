//! Versioned JSON state files, so separate processes can share party state.
//!
//! Every file is `{"body":{..},"fmt":"akap-state","kind":K,"v":1}` with keys
//! sorted and Blocks as lowercase 64-character hex.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::attacks::SessionTruth;
use crate::crypto::{pke_decrypt, Block, HelperData, PkeKeyPair, BLOCK_LEN};
use crate::netsim::Ephemerals;
use crate::protocol::{GatewayState, SensorId, SensorState, SmartCardStore};

pub const STATE_FMT: &str = "akap-state";
pub const STATE_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Gateway,
    Sensor,
    Card,
    Session,
}

impl StateKind {
    pub fn name(self) -> &'static str {
        match self {
            StateKind::Gateway => "gateway",
            StateKind::Sensor => "sensor",
            StateKind::Card => "card",
            StateKind::Session => "session",
        }
    }

    fn parse(s: &str) -> Option<StateKind> {
        [
            StateKind::Gateway,
            StateKind::Sensor,
            StateKind::Card,
            StateKind::Session,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Oracle record of one session: who ran it, its nonces, and the keys the
/// parties ended with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionFile {
    pub user: String,
    pub session: u64,
    pub ephemerals: Ephemerals,
    pub truth: SessionTruth,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum State {
    Gateway(GatewayState),
    Sensor(SensorState),
    Card(SmartCardStore),
    Session(SessionFile),
}

impl State {
    pub fn kind(&self) -> StateKind {
        match self {
            State::Gateway(_) => StateKind::Gateway,
            State::Sensor(_) => StateKind::Sensor,
            State::Card(_) => StateKind::Card,
            State::Session(_) => StateKind::Session,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StorageError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("refusing to write secrets in plaintext without acknowledgment")]
    PlaintextNotAcknowledged,
    #[error("not JSON: {0}")]
    Json(String),
    #[error("not an akap state file: {0}")]
    Format(String),
    #[error("unknown state version {0}")]
    UnknownVersion(u64),
    #[error("unknown state kind `{0}`")]
    UnknownKind(String),
    #[error("expected a {expected} state, found {found}")]
    WrongKind {
        expected: StateKind,
        found: StateKind,
    },
    #[error("field `{0}` is missing or has the wrong type")]
    Missing(String),
    #[error("field `{0}` is not valid hex")]
    Hex(String),
    #[error("field `{field}` has {found} bytes, expected {expected}")]
    Length {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

fn hex_block(b: &Block) -> Value {
    Value::String(b.to_hex())
}

fn obj(pairs: impl IntoIterator<Item = (String, Value)>) -> Value {
    Value::Object(pairs.into_iter().collect::<Map<_, _>>())
}

fn body_of(state: &State) -> Value {
    match state {
        State::Gateway(g) => obj([
            ("gj".into(), hex_block(&g.gj)),
            (
                "user_table".into(),
                obj(g
                    .user_table
                    .iter()
                    .map(|(hid, d1)| (hid.to_hex(), hex_block(d1)))),
            ),
            (
                "sensor_table".into(),
                obj(g
                    .sensor_table
                    .iter()
                    .map(|(sid, pid)| (sid.0.clone(), hex_block(pid)))),
            ),
            (
                "routing".into(),
                obj(g
                    .routing
                    .iter()
                    .map(|(hid, sid)| (hid.to_hex(), Value::String(sid.0.clone())))),
            ),
        ]),
        State::Sensor(s) => obj([
            ("sid".into(), Value::String(s.sid.0.clone())),
            ("sg".into(), hex_block(&s.sg)),
            ("l".into(), Value::String(hex::encode(&s.l))),
            ("pid".into(), hex_block(&s.pid)),
            (
                "public_key".into(),
                Value::String(hex::encode(&s.keys.public_key)),
            ),
            (
                "private_key".into(),
                Value::String(hex::encode(&s.keys.private_key)),
            ),
        ]),
        State::Card(c) => {
            let mut fields: Vec<(String, Value)> = c
                .blocks()
                .iter()
                .map(|(n, b)| (n.to_string(), hex_block(b)))
                .collect();
            fields.push(("tau".into(), Value::String(c.tau.to_hex())));
            obj(fields)
        }
        State::Session(s) => obj([
            ("user".into(), Value::String(s.user.clone())),
            ("session".into(), Value::from(s.session)),
            ("r_u".into(), hex_block(&s.ephemerals.r_u)),
            ("r_g".into(), hex_block(&s.ephemerals.r_g)),
            ("r_s".into(), hex_block(&s.ephemerals.r_s)),
            (
                "keys".into(),
                obj(s.truth.keys.iter().map(|(p, k)| (p.clone(), hex_block(k)))),
            ),
        ]),
    }
}

/// Canonical text of a state file, newline-terminated.
pub fn to_canonical_json(state: &State) -> String {
    let doc = obj([
        ("fmt".into(), Value::String(STATE_FMT.into())),
        ("v".into(), Value::from(STATE_VERSION)),
        ("kind".into(), Value::String(state.kind().name().into())),
        ("body".into(), body_of(state)),
    ]);
    let mut s = serde_json::to_string_pretty(&doc).expect("json values serialize");
    s.push('\n');
    s
}

/// Write `state` to `path`. The files hold long-term secrets in the clear,
/// so the caller must pass `allow_plaintext = true`.
pub fn save_state(state: &State, path: &Path, allow_plaintext: bool) -> Result<(), StorageError> {
    if !allow_plaintext {
        return Err(StorageError::PlaintextNotAcknowledged);
    }
    std::fs::write(path, to_canonical_json(state)).map_err(|source| StorageError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_state(path: &Path) -> Result<State, StorageError> {
    let text = std::fs::read_to_string(path).map_err(|source| StorageError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_state(&text)
}

/// Load and require a particular kind.
pub fn load_kind(path: &Path, expected: StateKind) -> Result<State, StorageError> {
    let state = load_state(path)?;
    if state.kind() != expected {
        return Err(StorageError::WrongKind {
            expected,
            found: state.kind(),
        });
    }
    Ok(state)
}

pub fn parse_state(text: &str) -> Result<State, StorageError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| StorageError::Json(e.to_string()))?;
    let top = doc
        .as_object()
        .ok_or_else(|| StorageError::Format("top level is not an object".into()))?;
    if top.get("fmt").and_then(Value::as_str) != Some(STATE_FMT) {
        return Err(StorageError::Format(format!(
            "`fmt` must be \"{STATE_FMT}\""
        )));
    }
    let v = top
        .get("v")
        .and_then(Value::as_u64)
        .ok_or_else(|| StorageError::Missing("v".into()))?;
    if v != STATE_VERSION {
        return Err(StorageError::UnknownVersion(v));
    }
    let kind_name = text_field(top, "kind")?;
    let kind =
        StateKind::parse(kind_name).ok_or_else(|| StorageError::UnknownKind(kind_name.into()))?;
    let body = top
        .get("body")
        .and_then(Value::as_object)
        .ok_or_else(|| StorageError::Missing("body".into()))?;
    match kind {
        StateKind::Gateway => parse_gateway(body).map(State::Gateway),
        StateKind::Sensor => parse_sensor(body).map(State::Sensor),
        StateKind::Card => parse_card(body).map(State::Card),
        StateKind::Session => parse_session(body).map(State::Session),
    }
}

fn text_field<'a>(o: &'a Map<String, Value>, name: &str) -> Result<&'a str, StorageError> {
    o.get(name)
        .and_then(Value::as_str)
        .ok_or_else(|| StorageError::Missing(name.into()))
}

fn map_field<'a>(
    o: &'a Map<String, Value>,
    name: &str,
) -> Result<&'a Map<String, Value>, StorageError> {
    o.get(name)
        .and_then(Value::as_object)
        .ok_or_else(|| StorageError::Missing(name.into()))
}

fn decode_hex(field: &str, s: &str) -> Result<Vec<u8>, StorageError> {
    if s.bytes().any(|c| c.is_ascii_uppercase()) {
        return Err(StorageError::Hex(field.into()));
    }
    hex::decode(s).map_err(|_| StorageError::Hex(field.into()))
}

fn exact<const N: usize>(field: &str, s: &str) -> Result<[u8; N], StorageError> {
    let bytes = decode_hex(field, s)?;
    bytes
        .as_slice()
        .try_into()
        .map_err(|_| StorageError::Length {
            field: field.into(),
            expected: N,
            found: bytes.len(),
        })
}

fn block_str(field: &str, s: &str) -> Result<Block, StorageError> {
    exact::<BLOCK_LEN>(field, s).map(Block)
}

fn block_field(o: &Map<String, Value>, name: &str) -> Result<Block, StorageError> {
    block_str(name, text_field(o, name)?)
}

fn parse_gateway(body: &Map<String, Value>) -> Result<GatewayState, StorageError> {
    let mut g = GatewayState::new(block_field(body, "gj")?);
    for (hid, d1) in map_field(body, "user_table")? {
        let field = format!("user_table.{hid}");
        let d1 = d1
            .as_str()
            .ok_or_else(|| StorageError::Missing(field.clone()))?;
        g.user_table
            .insert(block_str(&field, hid)?, block_str(&field, d1)?);
    }
    for (sid, pid) in map_field(body, "sensor_table")? {
        let field = format!("sensor_table.{sid}");
        let pid = pid
            .as_str()
            .ok_or_else(|| StorageError::Missing(field.clone()))?;
        g.sensor_table
            .insert(SensorId::new(sid.as_str()), block_str(&field, pid)?);
    }
    for (hid, sid) in map_field(body, "routing")? {
        let field = format!("routing.{hid}");
        let sid = sid
            .as_str()
            .ok_or_else(|| StorageError::Missing(field.clone()))?;
        let hid = block_str(&field, hid)?;
        if !g.user_table.contains_key(&hid) {
            return Err(StorageError::Invariant(format!(
                "route for unregistered HID {hid}"
            )));
        }
        g.routing.insert(hid, SensorId::new(sid));
    }
    Ok(g)
}

fn parse_sensor(body: &Map<String, Value>) -> Result<SensorState, StorageError> {
    let keys = PkeKeyPair {
        public_key: exact::<32>("public_key", text_field(body, "public_key")?)?.to_vec(),
        private_key: exact::<32>("private_key", text_field(body, "private_key")?)?.to_vec(),
    };
    let state = SensorState {
        sid: SensorId::new(text_field(body, "sid")?),
        sg: block_field(body, "sg")?,
        l: decode_hex("l", text_field(body, "l")?)?,
        pid: block_field(body, "pid")?,
        keys,
    };
    let opened = pke_decrypt(&state.keys.private_key, &state.l).map_err(|e| {
        StorageError::Invariant(format!("L does not open with the sensor key: {e}"))
    })?;
    if opened != state.pid.as_bytes() {
        return Err(StorageError::Invariant(
            "PID differs from the value sealed in L".into(),
        ));
    }
    Ok(state)
}

fn parse_card(body: &Map<String, Value>) -> Result<SmartCardStore, StorageError> {
    Ok(SmartCardStore {
        d1: block_field(body, "d1")?,
        d3: block_field(body, "d3")?,
        d4: block_field(body, "d4")?,
        omega: block_field(body, "omega")?,
        m: block_field(body, "m")?,
        tau: HelperData(exact("tau", text_field(body, "tau")?)?),
    })
}

fn parse_session(body: &Map<String, Value>) -> Result<SessionFile, StorageError> {
    let mut keys = BTreeMap::new();
    for (party, k) in map_field(body, "keys")? {
        let field = format!("keys.{party}");
        let k = k
            .as_str()
            .ok_or_else(|| StorageError::Missing(field.clone()))?;
        keys.insert(party.clone(), block_str(&field, k)?);
    }
    Ok(SessionFile {
        user: text_field(body, "user")?.to_string(),
        session: body
            .get("session")
            .and_then(Value::as_u64)
            .ok_or_else(|| StorageError::Missing("session".into()))?,
        ephemerals: Ephemerals {
            r_u: block_field(body, "r_u")?,
            r_g: block_field(body, "r_g")?,
            r_s: block_field(body, "r_s")?,
        },
        truth: SessionTruth {
            keys: keys.into_iter().collect(),
        },
    })
}
