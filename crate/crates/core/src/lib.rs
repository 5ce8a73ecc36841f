//! Executable model of a three-party user/gateway/sensor authentication and
//! key agreement scheme, with a simulated network, a Dolev-Yao adversary and
//! attack reproductions.
//!
//! [`crypto`] holds the primitives, [`protocol`] the party state machines and
//! wire format, [`netsim`] the seeded world that runs them, [`attacks`] the
//! knowledge closure engine and attack reports, and [`storage`] the JSON
//! state files shared by CLI invocations.

pub mod attacks;
pub mod crypto;
pub mod netsim;
pub mod protocol;
pub mod storage;
