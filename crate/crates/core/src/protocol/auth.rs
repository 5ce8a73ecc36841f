//! The four-message login and authentication flow.
//!
//! ```text
//! user                      gateway                       sensor
//!  |  M1 {HID,B2,X_UG,T1}  -->  |                             |
//!  |                            |  M2 {B4,B5,B6,X_GS,T2}  -->  |
//!  |                            |  <--  M3 {B8,X_SG,X_SU,T3}   |
//!  |  <-- M4 {B5,B10,B11,X_GU,X_SU,T4}                         |
//! ```
//!
//! Every party checks freshness first and draws its nonce only after all of
//! its checks pass, so a rejected message consumes no randomness and leaves no
//! state behind.

use crate::crypto::{rep_fuzzy, Block, HashAlg, SeededRng, Timestamp};

use super::error::{Check, ProtocolError};
use super::types::{
    GatewaySessionState, GatewayState, ProtocolConfig, SensorSessionState, SensorState,
    SessionOutcome, SmartCardStore, UserCredentials, UserSessionState, M1, M2, M3, M4,
};
use super::wire::MessageKind;

/// `SK = h(r_u || r_g || r_s)`, shared by all three parties.
pub fn derive_sk(hash: HashAlg, r_u: &Block, r_g: &Block, r_s: &Block) -> Block {
    hash.h(&[&r_u.0, &r_g.0, &r_s.0])
}

/// `|now - t| <= delta`.
pub fn check_fresh(
    cfg: &ProtocolConfig,
    message: MessageKind,
    timestamp: Timestamp,
    now: Timestamp,
) -> Result<(), ProtocolError> {
    if timestamp.distance(now) > cfg.delta {
        return Err(ProtocolError::StaleTimestamp {
            message,
            timestamp,
            now,
            delta: cfg.delta,
        });
    }
    Ok(())
}

fn expect(check: Check, got: &Block, want: &Block) -> Result<(), ProtocolError> {
    if got == want {
        Ok(())
    } else {
        Err(ProtocolError::AuthenticatorMismatch(check))
    }
}

/// Card-side recomputation of `(N, r_1, HID)` from the presented credentials.
/// Returns `None` when the `M' ?= M` check fails.
pub fn unlock_card(
    hash: HashAlg,
    cred: &UserCredentials,
    card: &SmartCardStore,
) -> Option<UnlockedCard> {
    let (id, pw) = (cred.id.as_bytes(), cred.pw.as_bytes());
    let sigma = rep_fuzzy(&cred.bio, &card.tau);
    let n = hash.canon_block("PWB", pw) ^ hash.h(&[id, &sigma.0]);
    let r1 = card.omega ^ n;
    let hid = hash.h(&[id, &r1.0]);
    let h_n_r1 = hash.h(&[&n.0, &r1.0]);
    if h_n_r1 ^ hid != card.m {
        return None;
    }
    let hpw = hash.h(&[pw, &sigma.0]);
    Some(UnlockedCard {
        n,
        r1,
        hid,
        hpw,
        h_n_r1,
    })
}

/// Values the card recovers from correct credentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnlockedCard {
    pub n: Block,
    pub r1: Block,
    pub hid: Block,
    pub hpw: Block,
    pub h_n_r1: Block,
}

/// User login: unlock the card locally, then emit M1 stamped `now`.
pub fn user_login(
    cfg: &ProtocolConfig,
    cred: &UserCredentials,
    card: &SmartCardStore,
    rng: &mut SeededRng,
    now: Timestamp,
) -> Result<(M1, UserSessionState), ProtocolError> {
    let hash = cfg.hash;
    let unlocked = unlock_card(hash, cred, card).ok_or(ProtocolError::LocalAuthFailed)?;
    // B_1 = D_3 ^ N ^ HPW = h(D_1 || G_j), the gateway's value.
    let b1 = card.d3 ^ unlocked.n ^ unlocked.hpw;
    let r_u = rng.next_block();
    let b2 = b1 ^ r_u;
    let x_ug = hash.h(&[&now.to_be_bytes(), &r_u.0, &unlocked.hid.0, &b2.0]);
    let m1 = M1 {
        hid: unlocked.hid,
        b2,
        x_ug,
        t1: now,
    };
    let session = UserSessionState {
        r_u,
        b1,
        d1: card.d1,
        hid: unlocked.hid,
        n: unlocked.n,
        t1: now,
    };
    Ok((m1, session))
}

impl GatewayState {
    fn sensor_mask(&self, hash: HashAlg, sid: &[u8]) -> Block {
        let hsid = hash.h(&[sid, &self.gj.0]);
        hash.h(&[&hsid.0, &self.gj.0])
    }

    /// Verify M1, recover `r_u`, and forward M2 to the routed sensor.
    pub fn process_m1(
        &self,
        cfg: &ProtocolConfig,
        m1: &M1,
        rng: &mut SeededRng,
        now: Timestamp,
    ) -> Result<(M2, GatewaySessionState), ProtocolError> {
        let hash = cfg.hash;
        check_fresh(cfg, MessageKind::M1, m1.t1, now)?;
        let d1 = *self
            .user_table
            .get(&m1.hid)
            .ok_or(ProtocolError::UnknownHid)?;
        let b1 = hash.h(&[&d1.0, &self.gj.0]);
        let r_u = b1 ^ m1.b2;
        let x_ug = hash.h(&[&m1.t1.to_be_bytes(), &r_u.0, &m1.hid.0, &m1.b2.0]);
        expect(Check::XUg, &x_ug, &m1.x_ug)?;

        let sid = self.routing.get(&m1.hid).ok_or(ProtocolError::NoRoute)?;
        let pid = *self
            .sensor_table
            .get(sid)
            .ok_or_else(|| ProtocolError::UnknownSensor(sid.0.clone()))?;

        let r_g = rng.next_block();
        let t2 = now;
        let sid_raw = sid.as_bytes();
        let b3 = r_u ^ self.sensor_mask(hash, sid_raw);
        let b4 = d1 ^ hash.h(&[&b3.0, sid_raw, &r_u.0]);
        let b5 = r_g ^ hash.h(&[&d1.0, &r_u.0]);
        let b6 = b3 ^ pid;
        let x_gs = if cfg.quirk_double_rg {
            hash.h(&[&t2.to_be_bytes(), &r_u.0, &r_g.0, &r_g.0, sid_raw, &b5.0])
        } else {
            hash.h(&[&t2.to_be_bytes(), &r_u.0, &r_g.0, sid_raw, &b5.0])
        };
        let m2 = M2 {
            b4,
            b5,
            b6,
            x_gs,
            t2,
        };
        let session = GatewaySessionState {
            r_u,
            r_g,
            d1,
            hid: m1.hid,
            sid: sid.clone(),
            b1,
            b5,
            t2,
        };
        Ok((m2, session))
    }

    /// Verify M3, derive SK, and answer the user with M4.
    pub fn process_m3(
        &self,
        cfg: &ProtocolConfig,
        session: &GatewaySessionState,
        m3: &M3,
        now: Timestamp,
    ) -> Result<(M4, SessionOutcome), ProtocolError> {
        let hash = cfg.hash;
        check_fresh(cfg, MessageKind::M3, m3.t3, now)?;
        let pid = *self
            .sensor_table
            .get(&session.sid)
            .ok_or_else(|| ProtocolError::UnknownSensor(session.sid.0.clone()))?;
        let b7 = m3.b8 ^ pid;
        let sg = self.sensor_mask(hash, session.sid.as_bytes()) ^ pid;
        let r_s = b7 ^ hash.h(&[&sg.0, &session.d1.0, &session.r_g.0]);
        let x_sg = hash.h(&[&m3.t3.to_be_bytes(), &session.r_g.0, &r_s.0, &b7.0, &sg.0]);
        expect(Check::XSg, &x_sg, &m3.x_sg)?;

        let sk = derive_sk(hash, &session.r_u, &session.r_g, &r_s);
        let b9 = session.d1 ^ session.b1;
        let b10 = b9 ^ hash.h(&[&session.hid.0, &self.gj.0]) ^ r_s;
        let b11 = session.sid.block(hash) ^ hash.h(&[&session.b1.0, &r_s.0]);
        let t4 = now;
        let x_gu = hash.h(&[&t4.to_be_bytes(), &session.r_u.0, &session.r_g.0, &b10.0]);
        let m4 = M4 {
            b5: session.b5,
            b10,
            b11,
            x_gu,
            x_su: m3.x_su,
            t4,
        };
        Ok((m4, SessionOutcome::confirmed(sk)))
    }
}

impl SensorState {
    /// Verify M2, derive SK, and answer the gateway with M3.
    pub fn process_m2(
        &self,
        cfg: &ProtocolConfig,
        m2: &M2,
        rng: &mut SeededRng,
        now: Timestamp,
    ) -> Result<(M3, SensorSessionState), ProtocolError> {
        let hash = cfg.hash;
        check_fresh(cfg, MessageKind::M2, m2.t2, now)?;
        let sid = self.sid.as_bytes();
        let b3 = m2.b6 ^ self.pid;
        // SG ^ PID = h(HSID || G_j), the mask the gateway put on r_u inside B_3.
        let r_u = b3 ^ (self.sg ^ self.pid);
        let d1 = m2.b4 ^ hash.h(&[&b3.0, sid, &r_u.0]);
        let r_g = m2.b5 ^ hash.h(&[&d1.0, &r_u.0]);
        let x_gs = hash.h(&[&m2.t2.to_be_bytes(), &r_u.0, &r_g.0, sid, &m2.b5.0]);
        expect(Check::XGs, &x_gs, &m2.x_gs)?;

        let r_s = rng.next_block();
        let t3 = now;
        let b7 = r_s ^ hash.h(&[&self.sg.0, &d1.0, &r_g.0]);
        let b8 = self.pid ^ b7;
        let sk = derive_sk(hash, &r_u, &r_g, &r_s);
        let x_sg = hash.h(&[&t3.to_be_bytes(), &r_g.0, &r_s.0, &b7.0, &self.sg.0]);
        let x_su = hash.h(&[&r_u.0, &r_s.0, &self.sid.block(hash).0, &d1.0]);
        let m3 = M3 { b8, x_sg, x_su, t3 };
        Ok((
            m3,
            SensorSessionState {
                r_u,
                r_g,
                r_s,
                d1,
                sk,
                t3,
            },
        ))
    }
}

impl SensorSessionState {
    pub fn outcome(&self) -> SessionOutcome {
        SessionOutcome::confirmed(self.sk)
    }
}

/// Final user step: recover `r_s` and `r_g`, derive SK, and check both peers.
pub fn user_process_m4(
    cfg: &ProtocolConfig,
    session: &UserSessionState,
    card: &SmartCardStore,
    m4: &M4,
    now: Timestamp,
) -> Result<SessionOutcome, ProtocolError> {
    let hash = cfg.hash;
    check_fresh(cfg, MessageKind::M4, m4.t4, now)?;
    let r_s = session.b1 ^ m4.b10 ^ card.d4;
    let r_g = m4.b5 ^ hash.h(&[&session.d1.0, &session.r_u.0]);
    let sk = derive_sk(hash, &session.r_u, &r_g, &r_s);
    let x_gu = hash.h(&[&m4.t4.to_be_bytes(), &session.r_u.0, &r_g.0, &m4.b10.0]);
    if x_gu != m4.x_gu {
        return Err(ProtocolError::GatewayAuthFailed);
    }
    let sid_block = m4.b11 ^ hash.h(&[&session.b1.0, &r_s.0]);
    let x_su = hash.h(&[&session.r_u.0, &r_s.0, &sid_block.0, &session.d1.0]);
    if x_su != m4.x_su {
        return Err(ProtocolError::SensorAuthFailed);
    }
    Ok(SessionOutcome::confirmed(sk))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{pke_keygen, Biometric, BIO_LEN};
    use crate::protocol::{
        sensor_finalize_registration, user_finalize_registration, user_register_request, SensorId,
        SensorRegRequest,
    };

    struct Fixture {
        cfg: ProtocolConfig,
        rng: SeededRng,
        gw: GatewayState,
        sensor: SensorState,
        cred: UserCredentials,
        card: SmartCardStore,
    }

    fn fixture(seed: u8) -> Fixture {
        let cfg = ProtocolConfig::default();
        let mut rng = SeededRng::new([seed; 32]);
        let mut gw = GatewayState::generate(&mut rng);
        let sid = SensorId::new("s1");
        let keys = pke_keygen(&mut rng);
        let req = SensorRegRequest {
            sid: sid.clone(),
            public_key: keys.public_key.clone(),
        };
        let resp = gw.register_sensor(&cfg, &req, &mut rng).unwrap();
        let sensor = sensor_finalize_registration(sid.clone(), keys, &resp).unwrap();
        let cred = UserCredentials::new("alice", "pw1", Biometric([0x3c; BIO_LEN])).unwrap();
        let (req, pending) = user_register_request(&cfg, &cred, &mut rng);
        let resp = gw.register_user(&cfg, &req).unwrap();
        gw.assign_route(req.hid, &sid).unwrap();
        let card = user_finalize_registration(&cfg, &pending, &resp);
        Fixture {
            cfg,
            rng,
            gw,
            sensor,
            cred,
            card,
        }
    }

    #[test]
    fn honest_run_agrees() {
        let mut f = fixture(1);
        let (m1, us) = user_login(&f.cfg, &f.cred, &f.card, &mut f.rng, Timestamp(1)).unwrap();
        let (m2, gs) =
            f.gw.process_m1(&f.cfg, &m1, &mut f.rng, Timestamp(1))
                .unwrap();
        let (m3, ss) = f
            .sensor
            .process_m2(&f.cfg, &m2, &mut f.rng, Timestamp(2))
            .unwrap();
        let (m4, g_out) = f.gw.process_m3(&f.cfg, &gs, &m3, Timestamp(3)).unwrap();
        let u_out = user_process_m4(&f.cfg, &us, &f.card, &m4, Timestamp(4)).unwrap();
        assert_eq!(u_out.sk, g_out.sk);
        assert_eq!(g_out.sk, ss.sk);
        assert_eq!(ss.sk, derive_sk(f.cfg.hash, &us.r_u, &gs.r_g, &ss.r_s));
        assert!(u_out.peer_confirmed && g_out.peer_confirmed);
    }

    #[test]
    fn derive_sk_of_zeros() {
        let z = Block::ZERO;
        assert_eq!(
            derive_sk(HashAlg::Sha256, &z, &z, &z).to_hex(),
            "2ea9ab9198d1638007400cd2c3bef1cc745b864b76011a0e1bc52180ac6452d4"
        );
    }

    #[test]
    fn derive_sk_is_order_sensitive() {
        let mut rng = SeededRng::new([2; 32]);
        for _ in 0..1000 {
            let (a, b, c) = (rng.next_block(), rng.next_block(), rng.next_block());
            let sk = derive_sk(HashAlg::Sha256, &a, &b, &c);
            assert_ne!(sk, derive_sk(HashAlg::Sha256, &b, &a, &c));
            assert_ne!(sk, derive_sk(HashAlg::Sha256, &a, &c, &b));
            assert_ne!(sk, derive_sk(HashAlg::Sha256, &c, &b, &a));
        }
    }

    #[test]
    fn wrong_password_fails_locally() {
        let mut f = fixture(3);
        let wrong = f.cred.with_password("pw2").unwrap();
        let before = f.rng.counter();
        let err = user_login(&f.cfg, &wrong, &f.card, &mut f.rng, Timestamp(1)).unwrap_err();
        assert_eq!(err, ProtocolError::LocalAuthFailed);
        assert_eq!(f.rng.counter(), before);
    }

    #[test]
    fn flipped_b2_fails_x_ug_and_draws_nothing() {
        let mut f = fixture(4);
        let (mut m1, _) = user_login(&f.cfg, &f.cred, &f.card, &mut f.rng, Timestamp(1)).unwrap();
        m1.b2 = m1.b2.flip_bit(17);
        let before = f.rng.counter();
        let err =
            f.gw.process_m1(&f.cfg, &m1, &mut f.rng, Timestamp(1))
                .unwrap_err();
        assert_eq!(err, ProtocolError::AuthenticatorMismatch(Check::XUg));
        assert_eq!(f.rng.counter(), before);
    }

    #[test]
    fn flipped_b5_fails_x_gs() {
        let mut f = fixture(5);
        let (m1, _) = user_login(&f.cfg, &f.cred, &f.card, &mut f.rng, Timestamp(1)).unwrap();
        let (mut m2, _) =
            f.gw.process_m1(&f.cfg, &m1, &mut f.rng, Timestamp(1))
                .unwrap();
        m2.b5 = m2.b5.flip_bit(200);
        let err = f
            .sensor
            .process_m2(&f.cfg, &m2, &mut f.rng, Timestamp(2))
            .unwrap_err();
        assert_eq!(err, ProtocolError::AuthenticatorMismatch(Check::XGs));
    }

    #[test]
    fn flipped_x_sg_fails_at_gateway() {
        let mut f = fixture(6);
        let (m1, _) = user_login(&f.cfg, &f.cred, &f.card, &mut f.rng, Timestamp(1)).unwrap();
        let (m2, gs) =
            f.gw.process_m1(&f.cfg, &m1, &mut f.rng, Timestamp(1))
                .unwrap();
        let (mut m3, _) = f
            .sensor
            .process_m2(&f.cfg, &m2, &mut f.rng, Timestamp(2))
            .unwrap();
        m3.x_sg = m3.x_sg.flip_bit(0);
        let err = f.gw.process_m3(&f.cfg, &gs, &m3, Timestamp(3)).unwrap_err();
        assert_eq!(err, ProtocolError::AuthenticatorMismatch(Check::XSg));
    }

    #[test]
    fn m4_tampering_names_the_failed_peer() {
        let mut f = fixture(7);
        let (m1, us) = user_login(&f.cfg, &f.cred, &f.card, &mut f.rng, Timestamp(1)).unwrap();
        let (m2, gs) =
            f.gw.process_m1(&f.cfg, &m1, &mut f.rng, Timestamp(1))
                .unwrap();
        let (m3, _) = f
            .sensor
            .process_m2(&f.cfg, &m2, &mut f.rng, Timestamp(2))
            .unwrap();
        let (m4, _) = f.gw.process_m3(&f.cfg, &gs, &m3, Timestamp(3)).unwrap();

        let bad_b10 = M4 {
            b10: m4.b10.flip_bit(9),
            ..m4
        };
        let bad_b11 = M4 {
            b11: m4.b11.flip_bit(9),
            ..m4
        };
        let run = |m: &M4| user_process_m4(&f.cfg, &us, &f.card, m, Timestamp(4));
        assert_eq!(run(&bad_b10).unwrap_err(), ProtocolError::GatewayAuthFailed);
        assert_eq!(run(&bad_b11).unwrap_err(), ProtocolError::SensorAuthFailed);
        assert!(run(&m4).is_ok());
    }

    #[test]
    fn freshness_window_is_inclusive() {
        let cfg = ProtocolConfig::default();
        let t = Timestamp(10);
        assert!(check_fresh(&cfg, MessageKind::M1, t, Timestamp(12)).is_ok());
        assert!(check_fresh(&cfg, MessageKind::M1, t, Timestamp(8)).is_ok());
        let err = check_fresh(&cfg, MessageKind::M1, t, Timestamp(13)).unwrap_err();
        assert!(err.is_stale());
    }

    #[test]
    fn stale_m1_is_rejected_before_lookup() {
        let mut f = fixture(8);
        let (mut m1, _) = user_login(&f.cfg, &f.cred, &f.card, &mut f.rng, Timestamp(1)).unwrap();
        m1.hid = Block::ZERO;
        let err =
            f.gw.process_m1(&f.cfg, &m1, &mut f.rng, Timestamp(4))
                .unwrap_err();
        assert!(err.is_stale());
    }
}
