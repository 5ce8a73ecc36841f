//! User and sensor registration over the secure channel.

use crate::crypto::{gen_fuzzy, pke_decrypt, pke_encrypt, Block, SeededRng};

use super::error::ProtocolError;
use super::types::{
    GatewayState, PendingRegistration, ProtocolConfig, RegRequest, RegResponse, SensorId,
    SensorRegRequest, SensorRegResponse, SensorState, SmartCardStore, UserCredentials,
};
use crate::crypto::PkeKeyPair;

/// User side, first half: blind the identity and derive `{HID, HPW, N}`.
///
/// Draws `r_1` and then σ from `rng`, in that order.
pub fn user_register_request(
    cfg: &ProtocolConfig,
    cred: &UserCredentials,
    rng: &mut SeededRng,
) -> (RegRequest, PendingRegistration) {
    let hash = cfg.hash;
    let (id, pw) = (cred.id.as_bytes(), cred.pw.as_bytes());
    let r1 = rng.next_block();
    let (sigma, tau) = gen_fuzzy(&cred.bio, rng);
    let hid = hash.h(&[id, &r1.0]);
    let hpw = hash.h(&[pw, &sigma.0]);
    let n = hash.canon_block("PWB", pw) ^ hash.h(&[id, &sigma.0]);
    (
        RegRequest { hid, hpw, n },
        PendingRegistration {
            r1,
            n,
            hid,
            sigma,
            tau,
        },
    )
}

/// User side, second half: build the smart card from the gateway's reply.
pub fn user_finalize_registration(
    cfg: &ProtocolConfig,
    pending: &PendingRegistration,
    resp: &RegResponse,
) -> SmartCardStore {
    let omega = pending.n ^ pending.r1;
    let m = cfg.hash.h(&[&pending.n.0, &pending.r1.0]) ^ pending.hid;
    SmartCardStore {
        d1: resp.d1,
        d3: resp.d3,
        d4: resp.d4,
        omega,
        m,
        tau: pending.tau,
    }
}

/// Sensor side: recover PID from L and keep `{SG, L}`.
pub fn sensor_finalize_registration(
    sid: SensorId,
    keys: PkeKeyPair,
    resp: &SensorRegResponse,
) -> Result<SensorState, ProtocolError> {
    let plain = pke_decrypt(&keys.private_key, &resp.l).map_err(ProtocolError::FinalizeFailed)?;
    let pid = Block::from_slice(&plain).ok_or(ProtocolError::FinalizeFailed(
        crate::crypto::PkeError::Malformed(plain.len()),
    ))?;
    Ok(SensorState {
        sid,
        sg: resp.sg,
        l: resp.l.clone(),
        pid,
        keys,
    })
}

impl GatewayState {
    pub fn new(gj: Block) -> Self {
        GatewayState {
            gj,
            user_table: Default::default(),
            sensor_table: Default::default(),
            routing: Default::default(),
        }
    }

    /// Fresh gateway whose secret `G_j` is the next rng block.
    pub fn generate(rng: &mut SeededRng) -> Self {
        GatewayState::new(rng.next_block())
    }

    /// Gateway half of user registration. A HID already in the table is rejected
    /// and leaves the table untouched.
    pub fn register_user(
        &mut self,
        cfg: &ProtocolConfig,
        req: &RegRequest,
    ) -> Result<RegResponse, ProtocolError> {
        if self.user_table.contains_key(&req.hid) {
            return Err(ProtocolError::RegistrationRejected("duplicate HID".into()));
        }
        let hash = cfg.hash;
        let d1 = hash.h(&[&req.hid.0, &req.n.0]);
        let d2 = hash.h(&[&d1.0, &self.gj.0]) ^ req.hpw;
        let d3 = d2 ^ req.n;
        let d4 = hash.h(&[&req.hid.0, &self.gj.0]) ^ d1;
        self.user_table.insert(req.hid, d1);
        Ok(RegResponse { d1, d3, d4 })
    }

    /// Gateway half of sensor registration. Draws the blinding value `b` from `rng`.
    pub fn register_sensor(
        &mut self,
        cfg: &ProtocolConfig,
        req: &SensorRegRequest,
        rng: &mut SeededRng,
    ) -> Result<SensorRegResponse, ProtocolError> {
        if req.sid.0.is_empty() {
            return Err(ProtocolError::RegistrationRejected("empty SID".into()));
        }
        if self.sensor_table.contains_key(&req.sid) {
            return Err(ProtocolError::RegistrationRejected(format!(
                "duplicate SID `{}`",
                req.sid
            )));
        }
        let hash = cfg.hash;
        let sid = req.sid.as_bytes();
        let b = rng.next_block();
        let pid = hash.h(&[sid, &b.0]);
        let hsid = hash.h(&[sid, &self.gj.0]);
        let sg = hash.h(&[&hsid.0, &self.gj.0]) ^ pid;
        let l = pke_encrypt(&req.public_key, &pid.0)
            .map_err(|e| ProtocolError::RegistrationRejected(format!("sensor public key: {e}")))?;
        self.sensor_table.insert(req.sid.clone(), pid);
        Ok(SensorRegResponse { sg, l })
    }

    /// Route sessions opened by `hid` to sensor `sid`.
    pub fn assign_route(&mut self, hid: Block, sid: &SensorId) -> Result<(), ProtocolError> {
        if !self.user_table.contains_key(&hid) {
            return Err(ProtocolError::UnknownHid);
        }
        if !self.sensor_table.contains_key(sid) {
            return Err(ProtocolError::UnknownSensor(sid.0.clone()));
        }
        self.routing.insert(hid, sid.clone());
        Ok(())
    }

    /// HID of the registered user whose smart card holds `d1`.
    pub fn hid_for_d1(&self, d1: &Block) -> Option<Block> {
        self.user_table
            .iter()
            .find_map(|(hid, stored)| (stored == d1).then_some(*hid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{pke_keygen, Biometric, HashAlg, BIO_LEN};

    fn cred() -> UserCredentials {
        UserCredentials::new("alice", "pw1", Biometric([0x5a; BIO_LEN])).unwrap()
    }

    #[test]
    fn user_registration_identities() {
        let cfg = ProtocolConfig::default();
        let h = |parts: &[&[u8]]| HashAlg::Sha256.h(parts);
        let mut rng = SeededRng::new([1; 32]);
        let mut gw = GatewayState::generate(&mut rng);
        let (req, pending) = user_register_request(&cfg, &cred(), &mut rng);
        assert_eq!(
            req.n ^ HashAlg::Sha256.canon_block("PWB", b"pw1"),
            h(&[b"alice", &pending.sigma.0])
        );
        let resp = gw.register_user(&cfg, &req).unwrap();
        assert_eq!(resp.d3 ^ req.n ^ req.hpw, h(&[&resp.d1.0, &gw.gj.0]));
        assert_eq!(resp.d4 ^ resp.d1, h(&[&req.hid.0, &gw.gj.0]));
        let card = user_finalize_registration(&cfg, &pending, &resp);
        assert_eq!(card.omega ^ req.n, pending.r1);
        assert_eq!(card.m ^ h(&[&req.n.0, &pending.r1.0]), req.hid);
        assert_eq!(gw.user_table.get(&req.hid), Some(&resp.d1));
    }

    #[test]
    fn same_credentials_different_seeds_give_different_hid() {
        let cfg = ProtocolConfig::default();
        let (a, _) = user_register_request(&cfg, &cred(), &mut SeededRng::new([1; 32]));
        let (b, _) = user_register_request(&cfg, &cred(), &mut SeededRng::new([2; 32]));
        assert_ne!(a.hid, b.hid);
    }

    #[test]
    fn duplicate_hid_is_rejected_without_mutation() {
        let cfg = ProtocolConfig::default();
        let mut rng = SeededRng::new([3; 32]);
        let mut gw = GatewayState::generate(&mut rng);
        let (req, _) = user_register_request(&cfg, &cred(), &mut rng);
        gw.register_user(&cfg, &req).unwrap();
        let before = gw.clone();
        assert!(matches!(
            gw.register_user(&cfg, &req),
            Err(ProtocolError::RegistrationRejected(_))
        ));
        assert_eq!(gw, before);
    }

    #[test]
    fn sensor_registration_identities() {
        let cfg = ProtocolConfig::default();
        let mut rng = SeededRng::new([4; 32]);
        let mut gw = GatewayState::generate(&mut rng);
        let keys = pke_keygen(&mut rng);
        let sid = SensorId::new("SN-7");
        let req = SensorRegRequest {
            sid: sid.clone(),
            public_key: keys.public_key.clone(),
        };
        let resp = gw.register_sensor(&cfg, &req, &mut rng).unwrap();
        let pid = gw.sensor_table[&sid];
        let hsid = HashAlg::Sha256.h(&[b"SN-7", &gw.gj.0]);
        assert_eq!(resp.sg ^ pid, HashAlg::Sha256.h(&[&hsid.0, &gw.gj.0]));
        assert_eq!(
            pke_decrypt(&keys.private_key, &resp.l).unwrap(),
            pid.0.to_vec()
        );

        let state = sensor_finalize_registration(sid.clone(), keys.clone(), &resp).unwrap();
        assert_eq!(state.pid, pid);
        let again = sensor_finalize_registration(sid.clone(), keys.clone(), &resp).unwrap();
        assert_eq!(state, again);

        let mut tampered = resp.clone();
        tampered.l[33] ^= 0x01;
        assert!(matches!(
            sensor_finalize_registration(sid.clone(), keys, &tampered),
            Err(ProtocolError::FinalizeFailed(_))
        ));

        assert!(gw.register_sensor(&cfg, &req, &mut rng).is_err());
    }

    #[test]
    fn routing_requires_known_parties() {
        let cfg = ProtocolConfig::default();
        let mut rng = SeededRng::new([5; 32]);
        let mut gw = GatewayState::generate(&mut rng);
        let (req, _) = user_register_request(&cfg, &cred(), &mut rng);
        let sid = SensorId::new("SN");
        assert_eq!(
            gw.assign_route(req.hid, &sid),
            Err(ProtocolError::UnknownHid)
        );
        gw.register_user(&cfg, &req).unwrap();
        assert_eq!(
            gw.assign_route(req.hid, &sid),
            Err(ProtocolError::UnknownSensor("SN".into()))
        );
    }

    #[test]
    fn empty_credentials_rejected() {
        let bio = Biometric([0; BIO_LEN]);
        assert!(UserCredentials::new("", "pw", bio).is_err());
        assert!(UserCredentials::new("id", "", bio).is_err());
    }
}
