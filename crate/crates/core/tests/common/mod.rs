//! Fixtures and proptest strategies shared by the integration targets.

#![allow(dead_code)]

use std::collections::BTreeMap;

use akap::attacks::SessionTruth;
use akap::crypto::{
    h, pke_encrypt, pke_keygen, Biometric, Block, HelperData, SeededRng, Timestamp, BIO_LEN,
};
use akap::netsim::{
    Channel, Ephemerals, Party, TranscriptEntry, TranscriptEvent, World, WorldConfig,
};
use akap::protocol::{
    GatewayState, Message, RegRequest, RegResponse, SensorId, SensorRegRequest, SensorRegResponse,
    SensorState, SmartCardStore, UserCredentials, M1, M2, M3, M4,
};
use akap::storage::{SessionFile, State};
use proptest::collection::{btree_map, vec};
use proptest::prelude::*;

/// Seed number `i` of a named family.
pub fn seed(family: &str, i: u64) -> [u8; 32] {
    h(&[family.as_bytes(), &i.to_be_bytes()]).0
}

pub fn credentials(id: &str, seed: &[u8; 32]) -> UserCredentials {
    let bio = Biometric::sample(&mut SeededRng::new(*seed).fork(id.as_bytes()));
    UserCredentials::new(id, format!("pw-{id}"), bio).unwrap()
}

/// A world with sensor `ecg-7` and user `alice` routed to it.
pub fn deployment(config: WorldConfig) -> (World, UserCredentials) {
    let cred = credentials("alice", &config.seed);
    let mut world = World::new(config).unwrap();
    world
        .run_registration(&cred, &SensorId::new("ecg-7"))
        .unwrap();
    (world, cred)
}

pub fn sensor_id() -> SensorId {
    SensorId::new("ecg-7")
}

pub fn public_messages(world: &World) -> Vec<(TranscriptEntry, Message)> {
    world
        .adversary_view()
        .into_iter()
        .map(|e| {
            let m = e.decode().unwrap();
            (e, m)
        })
        .collect()
}

pub fn arb_block() -> impl Strategy<Value = Block> {
    any::<[u8; 32]>().prop_map(Block)
}

pub fn arb_ts() -> impl Strategy<Value = Timestamp> {
    (1..=u64::MAX).prop_map(Timestamp)
}

fn arb_sid() -> impl Strategy<Value = SensorId> {
    "[a-zA-Z0-9._-]{1,16}|\\PC{1,8}".prop_map(SensorId)
}

pub fn arb_message() -> impl Strategy<Value = Message> {
    let b = arb_block;
    prop_oneof![
        (b(), b(), b(), arb_ts()).prop_map(|(hid, b2, x_ug, t1)| Message::M1(M1 {
            hid,
            b2,
            x_ug,
            t1
        })),
        (b(), b(), b(), b(), arb_ts()).prop_map(|(b4, b5, b6, x_gs, t2)| Message::M2(M2 {
            b4,
            b5,
            b6,
            x_gs,
            t2
        })),
        (b(), b(), b(), arb_ts()).prop_map(|(b8, x_sg, x_su, t3)| Message::M3(M3 {
            b8,
            x_sg,
            x_su,
            t3
        })),
        (b(), b(), b(), b(), b(), arb_ts()).prop_map(|(b5, b10, b11, x_gu, x_su, t4)| {
            Message::M4(M4 {
                b5,
                b10,
                b11,
                x_gu,
                x_su,
                t4,
            })
        }),
        (b(), b(), b()).prop_map(|(hid, hpw, n)| Message::UserRegRequest(RegRequest {
            hid,
            hpw,
            n
        })),
        (b(), b(), b()).prop_map(|(d1, d3, d4)| Message::UserRegResponse(RegResponse {
            d1,
            d3,
            d4
        })),
        (arb_sid(), vec(any::<u8>(), 0..80)).prop_map(|(sid, public_key)| {
            Message::SensorRegRequest(SensorRegRequest { sid, public_key })
        }),
        (b(), vec(any::<u8>(), 0..120))
            .prop_map(|(sg, l)| Message::SensorRegResponse(SensorRegResponse { sg, l })),
    ]
}

fn arb_party() -> impl Strategy<Value = Party> {
    prop_oneof![
        Just(Party::Gateway),
        Just(Party::Adversary),
        "[a-z0-9]{1,8}".prop_map(Party::User),
        arb_sid().prop_map(Party::Sensor),
    ]
}

/// Transcript file text with well-ordered entries and arbitrary payloads.
pub fn arb_transcript_json() -> impl Strategy<Value = String> {
    let entry = (
        0..3u64,
        0..3u64,
        any::<bool>(),
        arb_party(),
        arb_party(),
        vec(any::<u8>(), 0..200),
    );
    let event = (
        "[a-z-]{1,10}",
        0..100u64,
        proptest::option::of(0..10u64),
        proptest::option::of("[a-z]{1,6}"),
    )
        .prop_map(|(kind, tick, session, subject)| TranscriptEvent {
            kind,
            tick,
            session,
            subject,
        });
    (vec(entry, 0..12), vec(event, 0..4)).prop_map(|(raw, events)| {
        let (mut next_seq, mut tick) = (0, 0);
        let entries: Vec<TranscriptEntry> = raw
            .into_iter()
            .map(|(dseq, dtick, public, sender, receiver, payload)| {
                let seq = next_seq + dseq;
                next_seq = seq + 1;
                tick += dtick;
                TranscriptEntry {
                    seq,
                    tick,
                    channel: if public {
                        Channel::Public
                    } else {
                        Channel::Secure
                    },
                    sender,
                    receiver,
                    payload,
                }
            })
            .collect();
        serde_json::json!({
            "fmt": akap::netsim::TRANSCRIPT_FMT,
            "v": akap::netsim::TRANSCRIPT_VERSION,
            "entries": entries,
            "events": events,
        })
        .to_string()
    })
}

fn arb_card() -> impl Strategy<Value = SmartCardStore> {
    let b = arb_block;
    (b(), b(), b(), b(), b(), vec(any::<u8>(), BIO_LEN)).prop_map(|(d1, d3, d4, omega, m, tau)| {
        SmartCardStore {
            d1,
            d3,
            d4,
            omega,
            m,
            tau: HelperData(tau.try_into().unwrap()),
        }
    })
}

fn arb_gateway() -> impl Strategy<Value = GatewayState> {
    (
        arb_block(),
        btree_map(arb_block(), arb_block(), 0..6),
        btree_map("[a-z0-9-]{1,10}", arb_block(), 1..4),
        any::<Vec<(usize, usize)>>(),
    )
        .prop_map(|(gj, user_table, sensors, picks)| {
            let sensor_table: BTreeMap<SensorId, Block> =
                sensors.into_iter().map(|(k, v)| (SensorId(k), v)).collect();
            let hids: Vec<Block> = user_table.keys().copied().collect();
            let sids: Vec<SensorId> = sensor_table.keys().cloned().collect();
            let routing = if hids.is_empty() {
                BTreeMap::new()
            } else {
                picks
                    .into_iter()
                    .map(|(u, s)| (hids[u % hids.len()], sids[s % sids.len()].clone()))
                    .collect()
            };
            GatewayState {
                gj,
                user_table,
                sensor_table,
                routing,
            }
        })
}

fn arb_sensor() -> impl Strategy<Value = SensorState> {
    (arb_sid(), any::<[u8; 32]>(), arb_block(), arb_block()).prop_map(|(sid, key_seed, sg, pid)| {
        let keys = pke_keygen(&mut SeededRng::new(key_seed));
        let l = pke_encrypt(&keys.public_key, &pid.0).unwrap();
        SensorState {
            sid,
            sg,
            l,
            pid,
            keys,
        }
    })
}

fn arb_session() -> impl Strategy<Value = SessionFile> {
    (
        "[a-z0-9]{1,8}",
        any::<u64>(),
        (arb_block(), arb_block(), arb_block()),
        btree_map("(user|sensor):[a-z0-9]{1,6}|gateway", arb_block(), 0..4),
    )
        .prop_map(|(user, session, (r_u, r_g, r_s), keys)| SessionFile {
            user,
            session,
            ephemerals: Ephemerals { r_u, r_g, r_s },
            truth: SessionTruth {
                keys: keys.into_iter().collect(),
            },
        })
}

pub fn arb_state() -> impl Strategy<Value = State> {
    prop_oneof![
        arb_gateway().prop_map(State::Gateway),
        arb_sensor().prop_map(State::Sensor),
        arb_card().prop_map(State::Card),
        arb_session().prop_map(State::Session),
    ]
}
