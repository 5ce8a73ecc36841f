use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attacks::{SessionTruth, VerifierTruth};
use crate::crypto::{pke_keygen, Block, HashAlg, SeededRng, Timestamp};
use crate::protocol::{
    check_fresh, sensor_finalize_registration, unlock_card, user_finalize_registration, user_login,
    user_process_m4, user_register_request, GatewaySessionState, GatewayState, Message,
    MessageKind, ProtocolConfig, ProtocolError, SensorId, SensorRegRequest, SensorState,
    SessionOutcome, SmartCardStore, UserCredentials, UserSessionState, DEFAULT_DELTA,
};

use super::adversary::{
    ActionOutcome, AdversaryAction, DeliveryReport, Mutation, PartyError, ReceiverVerdict,
};
use super::transcript::{Channel, Party, Transcript, TranscriptEntry, TranscriptEvent};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldConfig {
    pub seed: [u8; 32],
    pub delta: u64,
    pub hash: HashAlg,
    pub quirk_double_rg: bool,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            seed: [0; 32],
            delta: DEFAULT_DELTA,
            hash: HashAlg::Sha256,
            quirk_double_rg: false,
        }
    }
}

impl WorldConfig {
    pub fn with_seed(seed: [u8; 32]) -> Self {
        WorldConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig {
            hash: self.hash,
            delta: self.delta,
            quirk_double_rg: self.quirk_double_rg,
        }
    }

    fn validate(&self) -> Result<(), WorldError> {
        if self.delta == 0 {
            return Err(WorldError::InvalidConfig(
                "delta must be at least 1 tick".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WorldError {
    #[error("invalid world config: {0}")]
    InvalidConfig(String),
    #[error("registration rejected: {0}")]
    Registration(ProtocolError),
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("unknown sensor `{0}`")]
    UnknownSensor(String),
    #[error("unknown session {0}")]
    UnknownSession(u64),
    #[error("{0} is not available yet")]
    Unavailable(&'static str),
    #[error("no transcript entry {0}")]
    UnknownSeq(u64),
    #[error("transcript entry {0} is on the secure channel")]
    NotPublic(u64),
    #[error("bad adversary action: {0}")]
    BadAction(String),
}

/// The three session nonces, as handed out by the leak oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ephemerals {
    pub r_u: Block,
    pub r_g: Block,
    pub r_s: Block,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartyStatus {
    /// Never received anything in this session.
    Idle,
    Confirmed(SessionOutcome),
    Rejected(PartyError),
    /// Waiting for a reply that never came.
    NoResponse,
}

impl PartyStatus {
    pub fn outcome(&self) -> Option<&SessionOutcome> {
        match self {
            PartyStatus::Confirmed(o) => Some(o),
            _ => None,
        }
    }

    pub fn rejection(&self) -> Option<&PartyError> {
        match self {
            PartyStatus::Rejected(e) => Some(e),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    Aborted { party: Party },
    Stalled { dropped: MessageKind },
}

/// Result of one authentication session as seen by each party.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRun {
    pub session: u64,
    pub user: PartyStatus,
    pub gateway: PartyStatus,
    pub sensor: PartyStatus,
    pub status: RunStatus,
}

impl SessionRun {
    pub fn all_confirmed(&self) -> bool {
        [&self.user, &self.gateway, &self.sensor]
            .iter()
            .all(|s| s.outcome().is_some_and(|o| o.peer_confirmed))
    }

    /// The three session keys, when every party finished.
    pub fn keys(&self) -> Option<[Block; 3]> {
        Some([
            self.user.outcome()?.sk,
            self.gateway.outcome()?.sk,
            self.sensor.outcome()?.sk,
        ])
    }

    pub fn rejection(&self) -> Option<(&'static str, &PartyError)> {
        [
            ("user", &self.user),
            ("gateway", &self.gateway),
            ("sensor", &self.sensor),
        ]
        .into_iter()
        .find_map(|(name, s)| s.rejection().map(|e| (name, e)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct UserParty {
    cred: UserCredentials,
    card: SmartCardStore,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct SessionRecord {
    user: String,
    r_u: Option<Block>,
    r_g: Option<Block>,
    r_s: Option<Block>,
    sks: Vec<(Party, Block)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Interception {
    message: MessageKind,
    mutation: Option<Mutation>,
}

enum Intercepted {
    Delivered { seq: u64, frame: Vec<u8> },
    Dropped,
}

/// Deterministic simulated deployment: one gateway, its users and sensors,
/// a logical clock, and the channel transcript.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct World {
    config: WorldConfig,
    clock: u64,
    rng: SeededRng,
    gateway: GatewayState,
    users: BTreeMap<String, UserParty>,
    sensors: BTreeMap<SensorId, SensorState>,
    transcript: Transcript,
    interceptions: Vec<Interception>,
    pending_user: Option<(String, UserSessionState, u64)>,
    pending_gateway: Option<(GatewaySessionState, u64)>,
    sessions: Vec<SessionRecord>,
}

impl World {
    /// Empty deployment; the gateway secret is the first rng block.
    pub fn new(config: WorldConfig) -> Result<World, WorldError> {
        config.validate()?;
        let mut rng = SeededRng::new(config.seed);
        let gateway = GatewayState::generate(&mut rng);
        Ok(World::assemble(config, rng, gateway))
    }

    /// Rebuild a deployment from persisted party state. Nonces come from `config.seed`.
    pub fn restore(
        config: WorldConfig,
        gateway: GatewayState,
        sensors: Vec<SensorState>,
        users: Vec<(UserCredentials, SmartCardStore)>,
    ) -> Result<World, WorldError> {
        config.validate()?;
        let rng = SeededRng::new(config.seed);
        let mut world = World::assemble(config, rng, gateway);
        for sensor in sensors {
            world.sensors.insert(sensor.sid.clone(), sensor);
        }
        for (cred, card) in users {
            world
                .users
                .insert(cred.id.clone(), UserParty { cred, card });
        }
        Ok(world)
    }

    fn assemble(config: WorldConfig, rng: SeededRng, gateway: GatewayState) -> World {
        World {
            config,
            clock: 0,
            rng,
            gateway,
            users: BTreeMap::new(),
            sensors: BTreeMap::new(),
            transcript: Transcript::new(),
            interceptions: Vec::new(),
            pending_user: None,
            pending_gateway: None,
            sessions: Vec::new(),
        }
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn protocol(&self) -> ProtocolConfig {
        self.config.protocol()
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn advance_clock(&mut self, ticks: u64) {
        self.clock += ticks;
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn gateway(&self) -> &GatewayState {
        &self.gateway
    }

    pub fn sensor(&self, sid: &SensorId) -> Option<&SensorState> {
        self.sensors.get(sid)
    }

    pub fn sensors(&self) -> impl Iterator<Item = &SensorState> {
        self.sensors.values()
    }

    pub fn card(&self, user: &str) -> Option<&SmartCardStore> {
        self.users.get(user).map(|u| &u.card)
    }

    pub fn user_ids(&self) -> impl Iterator<Item = &str> {
        self.users.keys().map(String::as_str)
    }

    fn send(&mut self, channel: Channel, sender: Party, receiver: Party, frame: Vec<u8>) -> u64 {
        self.clock += 1;
        self.transcript
            .record(self.clock, channel, sender, receiver, frame)
    }

    fn encode(msg: &Message) -> Vec<u8> {
        msg.encode()
            .expect("party-built frames fit the wire format")
    }

    /// Register a sensor over the secure channel.
    pub fn register_sensor(&mut self, sid: &SensorId) -> Result<(), WorldError> {
        let cfg = self.protocol();
        if self.sensors.contains_key(sid) || self.gateway.sensor_table.contains_key(sid) {
            return Err(WorldError::Registration(
                ProtocolError::RegistrationRejected(format!("duplicate SID `{sid}`")),
            ));
        }
        let keys = pke_keygen(&mut self.rng);
        let req = SensorRegRequest {
            sid: sid.clone(),
            public_key: keys.public_key.clone(),
        };
        let sensor = Party::Sensor(sid.clone());
        self.send(
            Channel::Secure,
            sensor.clone(),
            Party::Gateway,
            Self::encode(&Message::SensorRegRequest(req.clone())),
        );
        let resp = self
            .gateway
            .register_sensor(&cfg, &req, &mut self.rng)
            .map_err(WorldError::Registration)?;
        self.send(
            Channel::Secure,
            Party::Gateway,
            sensor,
            Self::encode(&Message::SensorRegResponse(resp.clone())),
        );
        let state = sensor_finalize_registration(sid.clone(), keys, &resp)
            .map_err(WorldError::Registration)?;
        self.sensors.insert(sid.clone(), state);
        Ok(())
    }

    /// Register a user over the secure channel and route them to `sid`.
    pub fn register_user(
        &mut self,
        cred: &UserCredentials,
        sid: &SensorId,
    ) -> Result<(), WorldError> {
        let cfg = self.protocol();
        if self.users.contains_key(&cred.id) {
            return Err(WorldError::Registration(
                ProtocolError::RegistrationRejected(format!(
                    "user `{}` already holds a smart card",
                    cred.id
                )),
            ));
        }
        if !self.gateway.sensor_table.contains_key(sid) {
            return Err(WorldError::UnknownSensor(sid.0.clone()));
        }
        let user = Party::User(cred.id.clone());
        let (req, pending) = user_register_request(&cfg, cred, &mut self.rng);
        self.send(
            Channel::Secure,
            user.clone(),
            Party::Gateway,
            Self::encode(&Message::UserRegRequest(req)),
        );
        let resp = self
            .gateway
            .register_user(&cfg, &req)
            .map_err(WorldError::Registration)?;
        self.gateway
            .assign_route(req.hid, sid)
            .map_err(WorldError::Registration)?;
        self.send(
            Channel::Secure,
            Party::Gateway,
            user,
            Self::encode(&Message::UserRegResponse(resp)),
        );
        let card = user_finalize_registration(&cfg, &pending, &resp);
        self.users.insert(
            cred.id.clone(),
            UserParty {
                cred: cred.clone(),
                card,
            },
        );
        Ok(())
    }

    /// Both registration flows: the sensor first, then the user routed to it.
    pub fn run_registration(
        &mut self,
        cred: &UserCredentials,
        sid: &SensorId,
    ) -> Result<(), WorldError> {
        if self.users.contains_key(&cred.id) {
            return Err(WorldError::Registration(
                ProtocolError::RegistrationRejected(format!(
                    "user `{}` already holds a smart card",
                    cred.id
                )),
            ));
        }
        self.register_sensor(sid)?;
        self.register_user(cred, sid)
    }

    /// Send a frame on the public channel, applying any armed interception.
    fn transmit(
        &mut self,
        kind: MessageKind,
        sender: Party,
        receiver: Party,
        frame: Vec<u8>,
    ) -> (u64, Intercepted) {
        let seq = self.send(Channel::Public, sender, receiver.clone(), frame.clone());
        let Some(pos) = self.interceptions.iter().position(|i| i.message == kind) else {
            return (seq, Intercepted::Delivered { seq, frame });
        };
        let interception = self.interceptions.remove(pos);
        match interception.mutation {
            None => (seq, Intercepted::Dropped),
            Some(mutation) => {
                // validated when armed
                let altered = mutation.apply(kind, &frame).unwrap_or(frame);
                let alt_seq = self.transcript.record(
                    self.clock,
                    Channel::Public,
                    Party::Adversary,
                    receiver,
                    altered.clone(),
                );
                (
                    seq,
                    Intercepted::Delivered {
                        seq: alt_seq,
                        frame: altered,
                    },
                )
            }
        }
    }

    fn now(&self) -> Timestamp {
        Timestamp(self.clock)
    }

    /// One login and authentication session for `user`.
    ///
    /// Verification failures do not make this an `Err`: they show up in the
    /// per-party status and in [`RunStatus`]. The transcript keeps every
    /// message sent before the abort.
    pub fn run_auth_session(&mut self, user: &str) -> Result<SessionRun, WorldError> {
        let cfg = self.protocol();
        let party = self
            .users
            .get(user)
            .cloned()
            .ok_or_else(|| WorldError::UnknownUser(user.to_string()))?;
        let user_addr = Party::User(user.to_string());
        let session = self.sessions.len() as u64;
        self.sessions.push(SessionRecord {
            user: user.to_string(),
            ..Default::default()
        });

        let mut run = SessionRun {
            session,
            user: PartyStatus::Idle,
            gateway: PartyStatus::Idle,
            sensor: PartyStatus::Idle,
            status: RunStatus::Completed,
        };

        // User -> gateway: M1. Login is stamped with the tick of its send.
        let t1 = Timestamp(self.clock + 1);
        let (m1, user_session) = match user_login(&cfg, &party.cred, &party.card, &mut self.rng, t1)
        {
            Ok(v) => v,
            Err(e) => {
                run.user = PartyStatus::Rejected(e.into());
                run.status = RunStatus::Aborted { party: user_addr };
                return Ok(run);
            }
        };
        self.sessions[session as usize].r_u = Some(user_session.r_u);
        self.pending_user = Some((user.to_string(), user_session.clone(), session));
        let (m1_seq, delivered) = self.transmit(
            MessageKind::M1,
            user_addr.clone(),
            Party::Gateway,
            Self::encode(&Message::M1(m1)),
        );
        let mut user_ids = vec![m1_seq];
        let mut gateway_ids = Vec::new();
        let Intercepted::Delivered { seq, frame } = delivered else {
            run.user = PartyStatus::NoResponse;
            run.status = RunStatus::Stalled {
                dropped: MessageKind::M1,
            };
            return Ok(run);
        };
        gateway_ids.push(seq);

        let now = self.now();
        let gateway_result = match Message::decode(&frame) {
            Ok(Message::M1(m)) => self
                .gateway
                .process_m1(&cfg, &m, &mut self.rng, now)
                .map_err(PartyError::from),
            Ok(other) => Err(PartyError::Unexpected {
                receiver: "gateway".into(),
                message: other.kind(),
            }),
            Err(e) => Err(e.into()),
        };
        let (m2, gw_session) = match gateway_result {
            Ok(v) => v,
            Err(e) => {
                run.gateway = PartyStatus::Rejected(e);
                run.user = PartyStatus::NoResponse;
                run.status = RunStatus::Aborted {
                    party: Party::Gateway,
                };
                return Ok(run);
            }
        };
        self.sessions[session as usize].r_g = Some(gw_session.r_g);
        self.pending_gateway = Some((gw_session.clone(), session));
        let sensor_addr = Party::Sensor(gw_session.sid.clone());

        // Gateway -> sensor: M2.
        let (m2_seq, delivered) = self.transmit(
            MessageKind::M2,
            Party::Gateway,
            sensor_addr.clone(),
            Self::encode(&Message::M2(m2)),
        );
        gateway_ids.push(m2_seq);
        let Intercepted::Delivered { seq, frame } = delivered else {
            run.gateway = PartyStatus::NoResponse;
            run.user = PartyStatus::NoResponse;
            run.status = RunStatus::Stalled {
                dropped: MessageKind::M2,
            };
            return Ok(run);
        };
        let mut sensor_ids = vec![seq];

        let now = self.now();
        let sensor_state = self
            .sensors
            .get(&gw_session.sid)
            .cloned()
            .ok_or_else(|| WorldError::UnknownSensor(gw_session.sid.0.clone()))?;
        let sensor_result = match Message::decode(&frame) {
            Ok(Message::M2(m)) => sensor_state
                .process_m2(&cfg, &m, &mut self.rng, now)
                .map_err(PartyError::from),
            Ok(other) => Err(PartyError::Unexpected {
                receiver: "sensor".into(),
                message: other.kind(),
            }),
            Err(e) => Err(e.into()),
        };
        let (m3, sn_session) = match sensor_result {
            Ok(v) => v,
            Err(e) => {
                run.sensor = PartyStatus::Rejected(e);
                run.gateway = PartyStatus::NoResponse;
                run.user = PartyStatus::NoResponse;
                run.status = RunStatus::Aborted { party: sensor_addr };
                return Ok(run);
            }
        };
        self.sessions[session as usize].r_s = Some(sn_session.r_s);

        // Sensor -> gateway: M3.
        let (m3_seq, delivered) = self.transmit(
            MessageKind::M3,
            sensor_addr.clone(),
            Party::Gateway,
            Self::encode(&Message::M3(m3)),
        );
        sensor_ids.push(m3_seq);
        let mut sensor_outcome = sn_session.outcome();
        sensor_outcome.transcript_ids = sensor_ids;
        self.sessions[session as usize]
            .sks
            .push((sensor_addr.clone(), sensor_outcome.sk));
        run.sensor = PartyStatus::Confirmed(sensor_outcome);
        let Intercepted::Delivered { seq, frame } = delivered else {
            run.gateway = PartyStatus::NoResponse;
            run.user = PartyStatus::NoResponse;
            run.status = RunStatus::Stalled {
                dropped: MessageKind::M3,
            };
            return Ok(run);
        };
        gateway_ids.push(seq);

        let now = self.now();
        let gateway_result = match Message::decode(&frame) {
            Ok(Message::M3(m)) => self
                .gateway
                .process_m3(&cfg, &gw_session, &m, now)
                .map_err(PartyError::from),
            Ok(other) => Err(PartyError::Unexpected {
                receiver: "gateway".into(),
                message: other.kind(),
            }),
            Err(e) => Err(e.into()),
        };
        let (m4, mut gateway_outcome) = match gateway_result {
            Ok(v) => v,
            Err(e) => {
                run.gateway = PartyStatus::Rejected(e);
                run.user = PartyStatus::NoResponse;
                run.status = RunStatus::Aborted {
                    party: Party::Gateway,
                };
                return Ok(run);
            }
        };
        self.pending_gateway = None;

        // Gateway -> user: M4.
        let (m4_seq, delivered) = self.transmit(
            MessageKind::M4,
            Party::Gateway,
            user_addr.clone(),
            Self::encode(&Message::M4(m4)),
        );
        gateway_ids.push(m4_seq);
        gateway_outcome.transcript_ids = gateway_ids;
        self.sessions[session as usize]
            .sks
            .push((Party::Gateway, gateway_outcome.sk));
        run.gateway = PartyStatus::Confirmed(gateway_outcome);
        let Intercepted::Delivered { seq, frame } = delivered else {
            run.user = PartyStatus::NoResponse;
            run.status = RunStatus::Stalled {
                dropped: MessageKind::M4,
            };
            return Ok(run);
        };
        user_ids.push(seq);

        let now = self.now();
        let user_result = match Message::decode(&frame) {
            Ok(Message::M4(m)) => {
                user_process_m4(&cfg, &user_session, &party.card, &m, now).map_err(PartyError::from)
            }
            Ok(other) => Err(PartyError::Unexpected {
                receiver: "user".into(),
                message: other.kind(),
            }),
            Err(e) => Err(e.into()),
        };
        match user_result {
            Ok(mut outcome) => {
                self.pending_user = None;
                outcome.transcript_ids = user_ids;
                self.sessions[session as usize]
                    .sks
                    .push((user_addr, outcome.sk));
                run.user = PartyStatus::Confirmed(outcome);
            }
            Err(e) => {
                run.user = PartyStatus::Rejected(e);
                run.status = RunStatus::Aborted { party: user_addr };
            }
        }
        Ok(run)
    }

    /// Public-channel entries, in order.
    pub fn adversary_view(&self) -> Vec<TranscriptEntry> {
        self.transcript.public_view()
    }

    pub fn adversary_act(&mut self, action: AdversaryAction) -> Result<ActionOutcome, WorldError> {
        match action {
            AdversaryAction::Observe => Ok(ActionOutcome::Observed(self.adversary_view())),
            AdversaryAction::Drop { message } => {
                self.interceptions.push(Interception {
                    message,
                    mutation: None,
                });
                Ok(ActionOutcome::Armed)
            }
            AdversaryAction::Modify { message, mutation } => {
                let probe = vec![0u8; message.timestamp_offset().map_or(1, |o| o + 8)];
                mutation
                    .apply(message, &probe)
                    .map_err(WorldError::BadAction)?;
                self.interceptions.push(Interception {
                    message,
                    mutation: Some(mutation),
                });
                Ok(ActionOutcome::Armed)
            }
            AdversaryAction::Inject { receiver, frame } => {
                let seq = self.send(
                    Channel::Public,
                    Party::Adversary,
                    receiver.clone(),
                    frame.clone(),
                );
                Ok(ActionOutcome::Delivered(
                    self.deliver_standalone(seq, receiver, &frame),
                ))
            }
            AdversaryAction::Replay { seq, wait } => {
                let entry = self
                    .transcript
                    .get(seq)
                    .cloned()
                    .ok_or(WorldError::UnknownSeq(seq))?;
                if entry.channel != Channel::Public {
                    return Err(WorldError::NotPublic(seq));
                }
                self.clock += wait;
                let new_seq = self.send(
                    Channel::Public,
                    Party::Adversary,
                    entry.receiver.clone(),
                    entry.payload.clone(),
                );
                Ok(ActionOutcome::Delivered(self.deliver_standalone(
                    new_seq,
                    entry.receiver,
                    &entry.payload,
                )))
            }
        }
    }

    /// Hand a frame to `receiver` outside of a scripted session.
    fn deliver_standalone(&mut self, seq: u64, receiver: Party, frame: &[u8]) -> DeliveryReport {
        let now = self.now();
        let decoded = Message::decode(frame);
        let message = decoded.as_ref().ok().map(Message::kind);
        let result = match decoded {
            Err(e) => Err(PartyError::Decode(e)),
            Ok(msg) => self.receive(&receiver, msg, now),
        };
        let (verdict, detail) = match result {
            Ok(detail) => (ReceiverVerdict::Accepted, detail),
            Err(e) => (e.verdict(), e.to_string()),
        };
        DeliveryReport {
            seq,
            tick: self.clock,
            receiver,
            message,
            verdict,
            detail,
        }
    }

    fn receive(
        &mut self,
        receiver: &Party,
        msg: Message,
        now: Timestamp,
    ) -> Result<String, PartyError> {
        let cfg = self.protocol();
        let unexpected = |m: &Message| PartyError::Unexpected {
            receiver: receiver.to_string(),
            message: m.kind(),
        };
        match (receiver, msg) {
            (Party::Gateway, Message::M1(m1)) => {
                let (_, session) = self.gateway.process_m1(&cfg, &m1, &mut self.rng, now)?;
                let id = self.sessions.len() as u64;
                self.sessions.push(SessionRecord {
                    r_g: Some(session.r_g),
                    ..Default::default()
                });
                self.pending_gateway = Some((session, id));
                Ok("gateway accepted M1 and opened a session".into())
            }
            (Party::Gateway, Message::M3(m3)) => {
                check_fresh(&cfg, MessageKind::M3, m3.t3, now)?;
                let (session, _) = self
                    .pending_gateway
                    .clone()
                    .ok_or(PartyError::NoSession(MessageKind::M3))?;
                let (_, outcome) = self.gateway.process_m3(&cfg, &session, &m3, now)?;
                self.pending_gateway = None;
                Ok(format!(
                    "gateway accepted M3, sk {}",
                    outcome.sk.fingerprint()
                ))
            }
            (Party::Sensor(sid), Message::M2(m2)) => {
                let sensor =
                    self.sensors
                        .get(sid)
                        .cloned()
                        .ok_or_else(|| PartyError::Unexpected {
                            receiver: receiver.to_string(),
                            message: MessageKind::M2,
                        })?;
                let (_, session) = sensor.process_m2(&cfg, &m2, &mut self.rng, now)?;
                Ok(format!(
                    "sensor accepted M2, sk {}",
                    session.sk.fingerprint()
                ))
            }
            (Party::User(id), Message::M4(m4)) => {
                check_fresh(&cfg, MessageKind::M4, m4.t4, now)?;
                let (owner, session, _) = self
                    .pending_user
                    .clone()
                    .filter(|(owner, _, _)| owner == id)
                    .ok_or(PartyError::NoSession(MessageKind::M4))?;
                let card = self.users[&owner].card;
                let outcome = user_process_m4(&cfg, &session, &card, &m4, now)?;
                self.pending_user = None;
                Ok(format!("user accepted M4, sk {}", outcome.sk.fingerprint()))
            }
            (_, other) => Err(unexpected(&other)),
        }
    }

    /// Leak oracle: the true nonces of `session`.
    pub fn leak_ephemerals(&mut self, session: u64) -> Result<Ephemerals, WorldError> {
        let record = self
            .sessions
            .get(session as usize)
            .ok_or(WorldError::UnknownSession(session))?;
        let leak = Ephemerals {
            r_u: record.r_u.ok_or(WorldError::Unavailable("r_u"))?,
            r_g: record.r_g.ok_or(WorldError::Unavailable("r_g"))?,
            r_s: record.r_s.ok_or(WorldError::Unavailable("r_s"))?,
        };
        self.transcript.note(TranscriptEvent {
            kind: "leak".into(),
            tick: self.clock,
            session: Some(session),
            subject: None,
        });
        Ok(leak)
    }

    /// Card-theft oracle: the smart card of `user`, byte for byte.
    pub fn dump_smart_card(&mut self, user: &str) -> Result<SmartCardStore, WorldError> {
        let card = self
            .users
            .get(user)
            .map(|u| u.card)
            .ok_or_else(|| WorldError::UnknownUser(user.to_string()))?;
        self.transcript.note(TranscriptEvent {
            kind: "card-dump".into(),
            tick: self.clock,
            session: None,
            subject: Some(user.to_string()),
        });
        Ok(card)
    }

    /// Session keys actually held by the parties, for adjudicating attacks.
    pub fn session_truth(&self, session: u64) -> Result<SessionTruth, WorldError> {
        let record = self
            .sessions
            .get(session as usize)
            .ok_or(WorldError::UnknownSession(session))?;
        Ok(SessionTruth {
            keys: record
                .sks
                .iter()
                .map(|(p, k)| (p.to_string(), *k))
                .collect(),
        })
    }

    /// What the card of `user` really binds: its HID and `h(N || r_1)`.
    pub fn verifier_truth(&self, user: &str) -> Result<VerifierTruth, WorldError> {
        let party = self
            .users
            .get(user)
            .ok_or_else(|| WorldError::UnknownUser(user.to_string()))?;
        let unlocked = unlock_card(self.config.hash, &party.cred, &party.card).ok_or(
            WorldError::Unavailable("card unlock with the owner's credentials"),
        )?;
        Ok(VerifierTruth {
            hid: unlocked.hid,
            h_n_r1: unlocked.h_n_r1,
        })
    }

    /// Ephemerals of a session, without recording a leak event.
    pub fn session_ephemerals(&self, session: u64) -> Option<Ephemerals> {
        let r = self.sessions.get(session as usize)?;
        Some(Ephemerals {
            r_u: r.r_u?,
            r_g: r.r_g?,
            r_s: r.r_s?,
        })
    }
}
