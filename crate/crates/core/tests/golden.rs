//! Frozen vectors for one seeded deployment, produced by `oracle/reference.py`.

use akap::crypto::{Biometric, Block, HashAlg, BIO_LEN};
use akap::netsim::{Channel, SessionRun, World, WorldConfig};
use akap::protocol::{unlock_card, SensorId, UserCredentials};
use akap::storage::{parse_state, to_canonical_json, State};
use serde_json::Value;

const GOLDEN: &str = include_str!("data/golden.json");

fn bytes(v: &Value, key: &str) -> Vec<u8> {
    hex::decode(v[key].as_str().unwrap_or_else(|| panic!("missing {key}"))).unwrap()
}

fn block(v: &Value, key: &str) -> Block {
    Block::from_slice(&bytes(v, key)).unwrap()
}

fn check_run(run_name: &str, hash: HashAlg, quirk: bool) {
    let doc: Value = serde_json::from_str(GOLDEN).unwrap();
    let run = &doc["runs"][run_name];
    let seed: [u8; 32] = bytes(&doc, "seed").try_into().unwrap();
    let bio: [u8; BIO_LEN] = bytes(&doc, "bio").try_into().unwrap();
    let cred = UserCredentials::new(
        doc["user"].as_str().unwrap(),
        doc["password"].as_str().unwrap(),
        Biometric(bio),
    )
    .unwrap();
    let sid = SensorId::new(doc["sensor"].as_str().unwrap());

    let config = WorldConfig {
        seed,
        hash,
        quirk_double_rg: quirk,
        ..Default::default()
    };
    let mut world = World::new(config).unwrap();
    world.run_registration(&cred, &sid).unwrap();

    assert_eq!(world.gateway().gj, block(run, "gj"), "{run_name}: gj");
    let sensor = world.sensor(&sid).unwrap();
    assert_eq!(
        sensor.keys.public_key,
        bytes(run, "sensor_public_key"),
        "{run_name}: pk"
    );
    assert_eq!(sensor.pid, block(run, "pid"), "{run_name}: pid");
    assert_eq!(sensor.sg, block(run, "sg"), "{run_name}: sg");
    assert_eq!(sensor.l, bytes(run, "l"), "{run_name}: L");

    let card = *world.card(&cred.id).unwrap();
    for (name, value) in card.blocks() {
        assert_eq!(value, block(run, name), "{run_name}: card {name}");
    }
    assert_eq!(card.tau.0.to_vec(), bytes(run, "tau"), "{run_name}: tau");
    let unlocked = unlock_card(hash, &cred, &card).unwrap();
    assert_eq!(unlocked.hid, block(run, "hid"));
    assert_eq!(unlocked.hpw, block(run, "hpw"));
    assert_eq!(unlocked.n, block(run, "n"));

    let files = &run["files"];
    let written = [
        ("gateway", State::Gateway(world.gateway().clone())),
        ("sensor", State::Sensor(sensor.clone())),
        ("card", State::Card(card)),
    ];
    for (name, state) in &written {
        assert_eq!(
            to_canonical_json(state),
            files[name].as_str().unwrap(),
            "{run_name}: {name} file"
        );
    }

    let outcome = world.run_auth_session(&cred.id).unwrap();
    check_session(&world, run, run_name, quirk, outcome);

    // The stored files alone, with a fresh nonce stream, give the recorded second session.
    let restored = &run["restored"];
    let load = |name: &str| parse_state(files[name].as_str().unwrap()).unwrap();
    let (State::Gateway(gateway), State::Sensor(sensor), State::Card(card)) =
        (load("gateway"), load("sensor"), load("card"))
    else {
        panic!("{run_name}: state kinds");
    };
    let seed: [u8; 32] = bytes(restored, "seed").try_into().unwrap();
    let config = WorldConfig {
        seed,
        hash,
        quirk_double_rg: quirk,
        ..Default::default()
    };
    let mut world =
        World::restore(config, gateway, vec![sensor], vec![(cred.clone(), card)]).unwrap();
    let outcome = world.run_auth_session(&cred.id).unwrap();
    check_session(
        &world,
        restored,
        &format!("{run_name} restored"),
        quirk,
        outcome,
    );
}

fn check_session(world: &World, run: &Value, run_name: &str, quirk: bool, outcome: SessionRun) {
    let frames: Vec<Vec<u8>> = world
        .transcript()
        .entries()
        .iter()
        .filter(|e| e.channel == Channel::Public)
        .map(|e| e.payload.clone())
        .collect();
    let expected_frames = if quirk { 2 } else { 4 };
    assert_eq!(frames.len(), expected_frames, "{run_name}: public frames");
    for (i, frame) in frames.iter().enumerate() {
        let key = format!("m{}", i + 1);
        assert_eq!(
            hex::encode(frame),
            run[&key].as_str().unwrap(),
            "{run_name}: {key}"
        );
    }

    if quirk {
        assert!(world.session_ephemerals(outcome.session).is_none());
        assert!(!outcome.all_confirmed());
        assert!(outcome
            .rejection()
            .is_some_and(|(party, _)| party == "sensor"));
    } else {
        let eph = world.session_ephemerals(outcome.session).unwrap();
        assert_eq!(eph.r_u, block(run, "r_u"));
        assert_eq!(eph.r_g, block(run, "r_g"));
        assert_eq!(eph.r_s, block(run, "r_s"));
        let sk = block(run, "sk");
        assert_eq!(outcome.keys(), Some([sk; 3]), "{run_name}: sk");
    }
}

#[test]
fn sha256_deployment_matches_reference() {
    check_run("sha256", HashAlg::Sha256, false);
}

#[test]
fn sha512_256_deployment_matches_reference() {
    check_run("sha512-256", HashAlg::Sha512_256, false);
}

#[test]
fn double_rg_gateway_matches_reference_and_fails_at_sensor() {
    check_run("sha256-quirk", HashAlg::Sha256, true);
}
