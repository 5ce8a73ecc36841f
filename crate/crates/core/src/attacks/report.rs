use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::crypto::{Block, HashAlg};
use crate::netsim::{Ephemerals, TranscriptEntry};
use crate::protocol::{derive_sk, Message, MessageKind, SmartCardStore};

use super::knowledge::{Rule, TraceStep};

pub const REPORT_FMT: &str = "akap-attack-report";
pub const REPORT_VERSION: u32 = 1;

/// Session keys held by the parties of one session, keyed by party address.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SessionTruth {
    pub keys: Vec<(String, Block)>,
}

/// What a smart card binds for its owner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierTruth {
    pub hid: Block,
    pub h_n_r1: Block,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttackError {
    #[error("attack inputs missing: {0}")]
    InputsMissing(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    Kssti,
    StolenVerifier,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackReport {
    pub fmt: String,
    pub v: u32,
    pub attack: AttackKind,
    pub success: bool,
    pub recovered: BTreeMap<String, Block>,
    pub trace: Vec<TraceStep>,
    pub assumptions: Vec<String>,
    pub notes: Vec<String>,
}

impl AttackReport {
    fn new(attack: AttackKind) -> Self {
        AttackReport {
            fmt: REPORT_FMT.to_string(),
            v: REPORT_VERSION,
            attack,
            success: false,
            recovered: BTreeMap::new(),
            trace: Vec::new(),
            assumptions: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

fn step(rule: Rule, parents: &[&Block], result: &Block) -> TraceStep {
    TraceStep {
        rule,
        parents: parents.iter().map(|b| b.to_hex()).collect(),
        result: result.to_hex(),
    }
}

/// Session key recovery from leaked ephemerals.
///
/// Succeeds when the candidate equals the key held by every party that
/// finished the session. The view is not needed to compute the key.
pub fn kssti_attack(
    hash: HashAlg,
    view: &[TranscriptEntry],
    leak: Option<&Ephemerals>,
    truth: &SessionTruth,
) -> Result<AttackReport, AttackError> {
    let leak = leak.ok_or(AttackError::InputsMissing(
        "leaked ephemerals r_u, r_g, r_s",
    ))?;
    let sk = derive_sk(hash, &leak.r_u, &leak.r_g, &leak.r_s);
    let mut report = AttackReport::new(AttackKind::Kssti);
    report.recovered.insert("sk".into(), sk);
    report
        .trace
        .push(step(Rule::Hash, &[&leak.r_u, &leak.r_g, &leak.r_s], &sk));
    report
        .assumptions
        .push("leak oracle: r_u, r_g, r_s of the target session".into());
    report
        .assumptions
        .push(format!("public hash function {}", hash.name()));
    report.success = !truth.keys.is_empty() && truth.keys.iter().all(|(_, k)| *k == sk);
    report.notes.push(
        "SK = h(r_u || r_g || r_s) has no long-term secret among its inputs, \
         so the three ephemerals alone determine it"
            .into(),
    );
    report.notes.push(format!(
        "{} public transcript entries available, none used",
        view.len()
    ));
    if truth.keys.is_empty() {
        report
            .notes
            .push("no party holds a key for this session".into());
    }
    for (party, k) in &truth.keys {
        let verdict = if *k == sk { "matches" } else { "differs from" };
        report
            .notes
            .push(format!("candidate {verdict} the key held by {party}"));
    }
    Ok(report)
}

/// HID from the first M1 on the public channel.
pub fn observed_hid(view: &[TranscriptEntry]) -> Option<Block> {
    view.iter().find_map(|e| match Message::decode(&e.payload) {
        Ok(Message::M1(m1)) => Some(m1.hid),
        _ => None,
    })
}

/// Smart-card forgery from a dumped card and an intercepted HID.
///
/// `k = HID ^ M` and `M' = k ^ HID`. `M' = M` holds for any HID by the
/// self-inverse law, so success additionally requires `k` to be the card
/// owner's real `h(N || r_1)`.
pub fn stolen_verifier_attack(
    card: Option<&SmartCardStore>,
    view: &[TranscriptEntry],
    truth: &VerifierTruth,
) -> Result<AttackReport, AttackError> {
    let card = card.ok_or(AttackError::InputsMissing("smart card dump"))?;
    let hid = observed_hid(view).ok_or(AttackError::InputsMissing("an M1 in the transcript"))?;
    let k = hid.xor(&card.m);
    let forged = k.xor(&hid);
    let mut report = AttackReport::new(AttackKind::StolenVerifier);
    report.recovered.insert("hid".into(), hid);
    report.recovered.insert("h_n_r1".into(), k);
    report.recovered.insert("m_forged".into(), forged);
    report.trace.push(step(Rule::Xor, &[&hid, &card.m], &k));
    report.trace.push(step(Rule::Xor, &[&k, &hid], &forged));
    report
        .assumptions
        .push("card dump: D1, D3, D4, Omega, M read from the smart card".into());
    report.assumptions.push(format!(
        "HID intercepted from {} on the public channel",
        MessageKind::M1
    ));
    report.success = forged == card.m && hid == truth.hid && k == truth.h_n_r1;
    report.notes.push(
        "named a stolen-verifier attack, yet the stolen values are the smart card's, \
         not a server-side verifier table"
            .into(),
    );
    report
        .notes
        .push("impersonation reaches the smart card's M check only".into());
    if hid != truth.hid {
        report
            .notes
            .push("observed HID does not belong to the card owner".into());
    }
    Ok(report)
}
