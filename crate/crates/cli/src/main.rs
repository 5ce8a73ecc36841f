//! `akap`: register parties, run sessions, reproduce attacks, probe the
//! network, and query the knowledge closure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use akap::attacks::{
    derivable, kssti_attack, stolen_verifier_attack, AttackError, AttackReport, ClosureError,
    ClosureParams, KnowledgeSet, SessionTruth, Target, VerifierTruth, DEFAULT_BUDGET, MAX_ARITY,
};
use akap::crypto::{h, Biometric, Block, HashAlg, SeededRng};
use akap::netsim::{
    ActionOutcome, AdversaryAction, Ephemerals, Mutation, PartyStatus, ReceiverVerdict, RunStatus,
    Transcript, TranscriptEntry, World, WorldConfig, WorldError,
};
use akap::protocol::{MessageKind, SensorId, SensorState, SmartCardStore, UserCredentials};
use akap::storage::{load_kind, save_state, SessionFile, State, StateKind, StorageError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

const EXIT_ATTACK_FAILED: u8 = 1;
const EXIT_REGISTRATION: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_PROTOCOL: u8 = 4;
const EXIT_MISSING_ORACLE: u8 = 5;
const EXIT_BUDGET: u8 = 6;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "akap", version, about = "Three-party IoT authentication lab")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// 32-byte seed as 64 hex characters.
    #[arg(long, global = true, value_parser = parse_seed, default_value = "0000000000000000000000000000000000000000000000000000000000000000")]
    seed: [u8; 32],
    /// Freshness window in ticks.
    #[arg(long, global = true, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    delta: u64,
    /// sha256 or sha512-256.
    #[arg(long, global = true, default_value = "sha256")]
    hash: HashAlg,
    #[arg(long, global = true, default_value = ".")]
    state_dir: PathBuf,
    /// Where to write the JSON result; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Compute X_GS at the gateway with r_g hashed twice.
    #[arg(long, global = true)]
    quirk_double_rg: bool,
    /// Acknowledge that state files hold secrets unencrypted.
    #[arg(long, global = true)]
    allow_plaintext_state: bool,
    /// Print full session keys instead of fingerprints.
    #[arg(long, global = true)]
    reveal_keys: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Register a user with the gateway, registering the sensor first if needed.
    RegisterUser {
        #[command(flatten)]
        user: UserArgs,
        #[arg(long)]
        sid: String,
    },
    /// Register a sensor with the gateway.
    RegisterSensor {
        #[arg(long)]
        sid: String,
    },
    /// Run one authentication session.
    Session {
        #[command(flatten)]
        user: UserArgs,
        /// Write the session transcript here.
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Also write the session oracle record (nonces and keys) here.
        #[arg(long)]
        leak_out: Option<PathBuf>,
    },
    /// Reproduce an attack and report whether it succeeded.
    #[command(subcommand)]
    Attack(AttackCmd),
    /// Active adversary probes: replay and in-flight tampering.
    #[command(subcommand)]
    Probe(ProbeCmd),
    /// Decide whether a target is derivable from attacker knowledge.
    Closure(ClosureArgs),
}

#[derive(Args)]
struct UserArgs {
    #[arg(long)]
    id: String,
    #[arg(long)]
    pw: String,
    /// Any string; the biometric template is generated from it.
    #[arg(long)]
    bio_seed: String,
    /// Bit positions to flip in the fresh biometric reading.
    #[arg(long, value_delimiter = ',')]
    bio_flip: Vec<usize>,
}

#[derive(Subcommand)]
enum AttackCmd {
    /// Session key from leaked ephemerals.
    Kssti {
        #[arg(long)]
        transcript: Option<PathBuf>,
        /// Session record supplying r_u, r_g, r_s.
        #[arg(long)]
        leak: Option<PathBuf>,
    },
    /// Forge the smart card's M from a card dump and an observed HID.
    StolenVerifier {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        card_dump: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ProbeCmd {
    /// Resend a recorded frame with its original timestamp.
    Replay {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long, conflicts_with = "message", required_unless_present = "message")]
        seq: Option<u64>,
        /// First public frame of this kind.
        #[arg(long)]
        message: Option<MessageKind>,
        /// Age of the frame at delivery, in ticks. Defaults to delta + 1.
        #[arg(long)]
        wait: Option<u64>,
    },
    /// Flip one bit of a message field in flight during a live session.
    Tamper {
        #[command(flatten)]
        user: UserArgs,
        #[arg(long)]
        message: MessageKind,
        #[arg(long)]
        field: String,
        #[arg(long, default_value_t = 0)]
        bit: usize,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Source {
    Transcript,
    Leak,
    Card,
}

#[derive(Args)]
struct ClosureArgs {
    /// Knowledge sources, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    initial: Vec<Source>,
    /// `sk` for the recorded session key, or 64 hex characters.
    #[arg(long)]
    target: String,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=3))]
    depth: u8,
    #[arg(long, default_value_t = MAX_ARITY as u8, value_parser = clap::value_parser!(u8).range(1..=MAX_ARITY as i64))]
    arity: u8,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long)]
    leak: Option<PathBuf>,
    #[arg(long)]
    card_dump: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<StorageError> for Failure {
    fn from(e: StorageError) -> Self {
        match e {
            StorageError::PlaintextNotAcknowledged => {
                Failure::new(EXIT_USAGE, format!("{e}; pass --allow-plaintext-state"))
            }
            _ => Failure::new(EXIT_IO, e.to_string()),
        }
    }
}

impl From<WorldError> for Failure {
    fn from(e: WorldError) -> Self {
        let code = match e {
            WorldError::Registration(_) => EXIT_REGISTRATION,
            WorldError::InvalidConfig(_) | WorldError::BadAction(_) => EXIT_USAGE,
            _ => EXIT_IO,
        };
        Failure::new(code, e.to_string())
    }
}

type CmdResult = Result<u8, Failure>;

fn parse_seed(s: &str) -> Result<[u8; 32], String> {
    let bytes = hex::decode(s).map_err(|e| format!("seed is not hex: {e}"))?;
    bytes
        .try_into()
        .map_err(|b: Vec<u8>| format!("seed must be 32 bytes, got {}", b.len()))
}

fn check_name(what: &str, s: &str) -> Result<(), Failure> {
    let ok = !s.is_empty()
        && s.bytes()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, b'-' | b'_' | b'.'))
        && s != "."
        && s != "..";
    if ok {
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_USAGE,
            format!("{what} `{s}` must be non-empty [A-Za-z0-9._-]"),
        ))
    }
}

struct Ctx {
    g: Global,
}

impl Ctx {
    fn world_config(&self, label: &str) -> WorldConfig {
        WorldConfig {
            seed: *SeededRng::new(self.g.seed).fork(label.as_bytes()).seed(),
            delta: self.g.delta,
            hash: self.g.hash,
            quirk_double_rg: self.g.quirk_double_rg,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.g.state_dir.join(name)
    }

    fn gateway_path(&self) -> PathBuf {
        self.path("gateway.json")
    }

    fn sensor_path(&self, sid: &str) -> PathBuf {
        self.path(&format!("sensor-{sid}.json"))
    }

    fn card_path(&self, id: &str) -> PathBuf {
        self.path(&format!("card-{id}.json"))
    }

    fn session_path(&self) -> PathBuf {
        self.path("session.json")
    }

    fn save(&self, state: &State, path: &Path) -> Result<(), Failure> {
        save_state(state, path, self.g.allow_plaintext_state).map_err(Failure::from)
    }

    fn require_ack(&self) -> Result<(), Failure> {
        if self.g.allow_plaintext_state {
            Ok(())
        } else {
            Err(StorageError::PlaintextNotAcknowledged.into())
        }
    }

    fn sensors(&self) -> Result<Vec<SensorState>, Failure> {
        let dir = &self.g.state_dir;
        let listing = fs::read_dir(dir)
            .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<PathBuf> = listing
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("sensor-") && n.ends_with(".json"))
            })
            .collect();
        paths.sort();
        paths
            .iter()
            .map(|p| match load_kind(p, StateKind::Sensor)? {
                State::Sensor(s) => Ok(s),
                _ => unreachable!("kind checked"),
            })
            .collect()
    }

    fn gateway(&self) -> Result<akap::protocol::GatewayState, Failure> {
        match load_kind(&self.gateway_path(), StateKind::Gateway)? {
            State::Gateway(g) => Ok(g),
            _ => unreachable!("kind checked"),
        }
    }

    fn card(&self, path: &Path) -> Result<SmartCardStore, Failure> {
        match load_kind(path, StateKind::Card)? {
            State::Card(c) => Ok(c),
            _ => unreachable!("kind checked"),
        }
    }

    fn session_file(&self, path: &Path) -> Result<SessionFile, Failure> {
        match load_kind(path, StateKind::Session)? {
            State::Session(s) => Ok(s),
            _ => unreachable!("kind checked"),
        }
    }

    fn emit(&self, json: &str) -> Result<(), Failure> {
        match &self.g.out {
            Some(p) => fs::write(p, json)
                .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", p.display()))),
            None => {
                print!("{json}");
                Ok(())
            }
        }
    }

    fn show_key(&self, k: &Block) -> String {
        if self.g.reveal_keys {
            k.to_hex()
        } else {
            k.fingerprint()
        }
    }

    fn credentials(&self, u: &UserArgs) -> Result<UserCredentials, Failure> {
        check_name("user id", &u.id)?;
        let mut rng = SeededRng::new(h(&[b"akap-bio", u.bio_seed.as_bytes()]).0);
        let mut bio = Biometric::sample(&mut rng);
        for &i in &u.bio_flip {
            if i >= akap::crypto::BIO_BITS {
                return Err(Failure::new(
                    EXIT_USAGE,
                    format!("bit {i} is outside the biometric"),
                ));
            }
            bio = bio.flip_bit(i);
        }
        UserCredentials::new(&u.id, &u.pw, bio).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))
    }

    /// World holding the persisted gateway and sensors, or a fresh one.
    fn world(
        &self,
        label: &str,
        users: Vec<(UserCredentials, SmartCardStore)>,
    ) -> Result<World, Failure> {
        let config = self.world_config(label);
        if self.gateway_path().exists() {
            Ok(World::restore(
                config,
                self.gateway()?,
                self.sensors()?,
                users,
            )?)
        } else {
            Ok(World::new(config)?)
        }
    }

    fn existing_world(
        &self,
        label: &str,
        users: Vec<(UserCredentials, SmartCardStore)>,
    ) -> Result<World, Failure> {
        let config = self.world_config(label);
        Ok(World::restore(
            config,
            self.gateway()?,
            self.sensors()?,
            users,
        )?)
    }
}

fn register_sensor(ctx: &Ctx, sid: &str) -> CmdResult {
    check_name("sensor id", sid)?;
    ctx.require_ack()?;
    let mut world = ctx.world(&format!("register-sensor:{sid}"), Vec::new())?;
    let sid = SensorId::new(sid);
    world.register_sensor(&sid)?;
    let sensor = world.sensor(&sid).expect("just registered").clone();
    ctx.save(
        &State::Gateway(world.gateway().clone()),
        &ctx.gateway_path(),
    )?;
    ctx.save(&State::Sensor(sensor), &ctx.sensor_path(&sid.0))?;
    println!("registered sensor {sid}");
    Ok(0)
}

fn register_user(ctx: &Ctx, user: &UserArgs, sid: &str) -> CmdResult {
    check_name("sensor id", sid)?;
    let cred = ctx.credentials(user)?;
    ctx.require_ack()?;
    if ctx.card_path(&cred.id).exists() {
        return Err(Failure::new(
            EXIT_REGISTRATION,
            format!(
                "registration rejected: user `{}` already holds a smart card",
                cred.id
            ),
        ));
    }
    let mut world = ctx.world(&format!("register-user:{}", cred.id), Vec::new())?;
    let sid = SensorId::new(sid);
    let new_sensor = world.sensor(&sid).is_none();
    if new_sensor {
        world.register_sensor(&sid)?;
    }
    world.register_user(&cred, &sid)?;
    ctx.save(
        &State::Gateway(world.gateway().clone()),
        &ctx.gateway_path(),
    )?;
    if new_sensor {
        let sensor = world.sensor(&sid).expect("just registered").clone();
        ctx.save(&State::Sensor(sensor), &ctx.sensor_path(&sid.0))?;
        println!("registered sensor {sid}");
    }
    let card = *world.card(&cred.id).expect("just registered");
    ctx.save(&State::Card(card), &ctx.card_path(&cred.id))?;
    println!("registered user {} routed to {sid}", cred.id);
    Ok(0)
}

fn user_world(
    ctx: &Ctx,
    label: &str,
    user: &UserArgs,
) -> Result<(World, UserCredentials), Failure> {
    let cred = ctx.credentials(user)?;
    let card = ctx.card(&ctx.card_path(&cred.id))?;
    let world = ctx.existing_world(label, vec![(cred.clone(), card)])?;
    Ok((world, cred))
}

fn session(
    ctx: &Ctx,
    user: &UserArgs,
    transcript: Option<&Path>,
    leak_out: Option<&Path>,
) -> CmdResult {
    let (mut world, cred) = user_world(ctx, &format!("session:{}", user.id), user)?;
    let run = world.run_auth_session(&cred.id)?;
    if let Some(p) = transcript {
        fs::write(p, world.transcript().to_json())
            .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", p.display())))?;
    }
    let parties = [
        (format!("user:{}", cred.id), &run.user),
        ("gateway".to_string(), &run.gateway),
        (routed_sensor(&world, &run), &run.sensor),
    ];
    let width = parties.iter().map(|(n, _)| n.len()).max().unwrap_or(0);
    for (name, status) in &parties {
        let shown = match status {
            PartyStatus::Confirmed(o) => format!("sk {}", ctx.show_key(&o.sk)),
            PartyStatus::Rejected(e) => format!("rejected: {e}"),
            PartyStatus::NoResponse => "no response".into(),
            PartyStatus::Idle => "idle".into(),
        };
        println!("{name:width$}  {shown}");
    }
    if let (Some(eph), Ok(truth)) = (
        world.session_ephemerals(run.session),
        world.session_truth(run.session),
    ) {
        let record = State::Session(SessionFile {
            user: cred.id.clone(),
            session: run.session,
            ephemerals: eph,
            truth,
        });
        if ctx.g.allow_plaintext_state {
            ctx.save(&record, &ctx.session_path())?;
        }
        if let Some(p) = leak_out {
            ctx.save(&record, p)?;
        }
    }
    match (&run.status, run.all_confirmed()) {
        (RunStatus::Completed, true) => Ok(0),
        _ => {
            let reason = run
                .rejection()
                .map(|(_, e)| e.to_string())
                .unwrap_or_else(|| format!("{:?}", run.status));
            Err(Failure::new(EXIT_PROTOCOL, reason))
        }
    }
}

fn routed_sensor(world: &World, run: &akap::netsim::SessionRun) -> String {
    let ids = run
        .sensor
        .outcome()
        .map(|o| o.transcript_ids.clone())
        .unwrap_or_default();
    ids.first()
        .and_then(|&seq| world.transcript().get(seq))
        .map(|e| e.receiver.to_string())
        .unwrap_or_else(|| "sensor".into())
}

fn load_transcript(path: &Path) -> Result<Transcript, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
    Transcript::from_json(&text)
        .map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))
}

fn view_of(path: Option<&Path>) -> Result<Vec<TranscriptEntry>, Failure> {
    match path {
        Some(p) => Ok(load_transcript(p)?.public_view()),
        None => Ok(Vec::new()),
    }
}

fn finish_report(ctx: &Ctx, report: &AttackReport) -> CmdResult {
    ctx.emit(&report.to_json())?;
    let verdict = if report.success {
        "succeeded"
    } else {
        "failed"
    };
    eprintln!("attack {verdict}");
    Ok(if report.success {
        0
    } else {
        EXIT_ATTACK_FAILED
    })
}

fn missing(e: AttackError) -> Failure {
    Failure::new(EXIT_MISSING_ORACLE, e.to_string())
}

fn attack(ctx: &Ctx, cmd: &AttackCmd) -> CmdResult {
    match cmd {
        AttackCmd::Kssti { transcript, leak } => {
            let leak: Option<Ephemerals> = match leak {
                Some(p) => Some(ctx.session_file(p)?.ephemerals),
                None => None,
            };
            let view = view_of(transcript.as_deref())?;
            let truth = if leak.is_some() {
                ctx.session_file(&ctx.session_path())?.truth
            } else {
                SessionTruth::default()
            };
            let report = kssti_attack(ctx.g.hash, &view, leak.as_ref(), &truth).map_err(missing)?;
            finish_report(ctx, &report)
        }
        AttackCmd::StolenVerifier {
            transcript,
            card_dump,
        } => {
            let Some(card_path) = card_dump else {
                return Err(missing(AttackError::InputsMissing("smart card dump")));
            };
            let card = ctx.card(card_path)?;
            let view = view_of(Some(transcript))?;
            let owner = ctx.gateway()?.hid_for_d1(&card.d1);
            let truth = match owner {
                Some(hid) => VerifierTruth {
                    hid,
                    h_n_r1: card.m.xor(&hid),
                },
                None => VerifierTruth {
                    hid: Block::ZERO,
                    h_n_r1: Block::ZERO,
                },
            };
            let mut report = stolen_verifier_attack(Some(&card), &view, &truth).map_err(missing)?;
            if owner.is_none() {
                report.success = false;
                report
                    .notes
                    .push("card owner is not registered at this gateway".into());
            }
            finish_report(ctx, &report)
        }
    }
}

fn verdict_name(v: &ReceiverVerdict) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn probe(ctx: &Ctx, cmd: &ProbeCmd) -> CmdResult {
    match cmd {
        ProbeCmd::Replay {
            transcript,
            seq,
            message,
            wait,
        } => {
            let recorded = load_transcript(transcript)?;
            let entry = recorded
                .public_view()
                .into_iter()
                .find(|e| match (seq, message) {
                    (Some(s), _) => e.seq == *s,
                    (None, Some(m)) => e.payload.first() == Some(&m.tag()),
                    (None, None) => false,
                })
                .ok_or_else(|| {
                    Failure::new(EXIT_USAGE, "no matching public frame in the transcript")
                })?;
            let age = wait.unwrap_or(ctx.g.delta + 1);
            let mut world = ctx.existing_world("probe-replay", Vec::new())?;
            let deliver_at = entry.tick + age;
            world.advance_clock(deliver_at.saturating_sub(world.clock() + 1));
            let out = world.adversary_act(AdversaryAction::Inject {
                receiver: entry.receiver.clone(),
                frame: entry.payload.clone(),
            })?;
            let ActionOutcome::Delivered(report) = out else {
                unreachable!("injection delivers immediately")
            };
            let doc = json!({
                "probe": "replay",
                "seq": entry.seq,
                "message": report.message.map(|m| m.name()),
                "receiver": report.receiver.to_string(),
                "sent_tick": entry.tick,
                "delivered_tick": report.tick,
                "delta": ctx.g.delta,
                "verdict": verdict_name(&report.verdict),
                "detail": report.detail,
            });
            eprintln!(
                "replay of seq {} at age {}: {}",
                entry.seq,
                report.tick - entry.tick,
                verdict_name(&report.verdict)
            );
            ctx.emit(&pretty(&doc))?;
            Ok(0)
        }
        ProbeCmd::Tamper {
            user,
            message,
            field,
            bit,
        } => {
            if !MessageKind::AUTH.contains(message) {
                return Err(Failure::new(EXIT_USAGE, "tamper targets M1..M4"));
            }
            if *bit >= 256 {
                return Err(Failure::new(EXIT_USAGE, "bit must be below 256"));
            }
            let (mut world, cred) = user_world(ctx, &format!("probe-tamper:{}", user.id), user)?;
            let mutation = Mutation::FlipFieldBit {
                field: field.clone(),
                bit: *bit,
            };
            world
                .adversary_act(AdversaryAction::Modify {
                    message: *message,
                    mutation,
                })
                .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
            let run = world.run_auth_session(&cred.id)?;
            let (receiver, verdict, detail) = match run.rejection() {
                Some((party, e)) => (party.to_string(), verdict_name(&e.verdict()), e.to_string()),
                None => (
                    "none".into(),
                    verdict_name(&ReceiverVerdict::Accepted),
                    String::new(),
                ),
            };
            let doc = json!({
                "probe": "tamper",
                "message": message.name(),
                "field": field,
                "bit": bit,
                "rejected_by": receiver,
                "verdict": verdict,
                "detail": detail,
                "all_confirmed": run.all_confirmed(),
            });
            eprintln!(
                "tamper {}.{field} bit {bit}: {verdict} at {receiver}",
                message.name()
            );
            ctx.emit(&pretty(&doc))?;
            Ok(0)
        }
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn closure_cmd(ctx: &Ctx, args: &ClosureArgs) -> CmdResult {
    let mut initial = KnowledgeSet::new();
    for source in &args.initial {
        let part = match source {
            Source::Transcript => {
                let p = args.transcript.as_deref().ok_or_else(|| {
                    Failure::new(
                        EXIT_MISSING_ORACLE,
                        "--initial transcript needs --transcript",
                    )
                })?;
                KnowledgeSet::from_view(&load_transcript(p)?.public_view())
            }
            Source::Leak => {
                let p = args.leak.as_deref().ok_or_else(|| {
                    Failure::new(EXIT_MISSING_ORACLE, "--initial leak needs --leak")
                })?;
                KnowledgeSet::from_leak(&ctx.session_file(p)?.ephemerals)
            }
            Source::Card => {
                let p = args.card_dump.as_deref().ok_or_else(|| {
                    Failure::new(EXIT_MISSING_ORACLE, "--initial card needs --card-dump")
                })?;
                KnowledgeSet::from_card(&ctx.card(p)?)
            }
        };
        initial.extend_given(&part);
    }
    let target = if args.target == "sk" {
        let record = ctx.session_file(&ctx.session_path())?;
        let e = record.ephemerals;
        let (_, sk) = record
            .truth
            .keys
            .first()
            .cloned()
            .ok_or_else(|| Failure::new(EXIT_IO, "session record holds no key"))?;
        Target::with_preimage(sk, [e.r_u.0, e.r_g.0, e.r_s.0].concat())
    } else {
        let b = Block::from_hex(&args.target)
            .map_err(|e| Failure::new(EXIT_USAGE, format!("--target: {e}")))?;
        Target::block(b)
    };
    let params = ClosureParams::new(args.depth)
        .arity(args.arity as usize)
        .budget(args.budget)
        .hash(ctx.g.hash);
    let result = match derivable(&initial, &target, params) {
        Ok(d) => d,
        Err(ClosureError::BudgetExceeded { budget, partial }) => {
            return Err(Failure::new(
                EXIT_BUDGET,
                format!(
                    "term budget {budget} exceeded; partial closure holds {} terms",
                    partial.len()
                ),
            ));
        }
        Err(ClosureError::BadPreimage) => {
            return Err(Failure::new(
                EXIT_IO,
                "session record is inconsistent: nonces do not hash to sk",
            ));
        }
        Err(e) => return Err(Failure::new(EXIT_USAGE, e.to_string())),
    };
    let doc = json!({
        "target": target.value.to_hex(),
        "depth": args.depth,
        "arity": args.arity,
        "initial_terms": initial.len(),
        "examined_terms": result.examined,
        "derivable": result.derivable,
        "trace": result.trace,
    });
    ctx.emit(&pretty(&doc))?;
    eprintln!(
        "{} at depth {} (arity {})",
        if result.derivable {
            "derivable"
        } else {
            "not derivable"
        },
        args.depth,
        args.arity
    );
    Ok(if result.derivable {
        0
    } else {
        EXIT_ATTACK_FAILED
    })
}

fn run(cli: Cli) -> CmdResult {
    let ctx = Ctx { g: cli.global };
    match &cli.command {
        Command::RegisterUser { user, sid } => register_user(&ctx, user, sid),
        Command::RegisterSensor { sid } => register_sensor(&ctx, sid),
        Command::Session {
            user,
            transcript,
            leak_out,
        } => session(&ctx, user, transcript.as_deref(), leak_out.as_deref()),
        Command::Attack(cmd) => attack(&ctx, cmd),
        Command::Probe(cmd) => probe(&ctx, cmd),
        Command::Closure(args) => closure_cmd(&ctx, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
