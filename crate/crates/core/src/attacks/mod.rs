//! Reproductions of the two published attacks, and a bounded knowledge
//! closure giving derivability evidence.

mod knowledge;
mod report;

pub use knowledge::{
    apply_rule, closure, derivable, ClosureError, ClosureParams, Derivability, Entry, KnowledgeSet,
    Origin, Provenance, Rule, Target, Term, TraceStep, DEFAULT_BUDGET, MAX_ARITY, MAX_DEPTH,
};
pub use report::{
    kssti_attack, observed_hid, stolen_verifier_attack, AttackError, AttackKind, AttackReport,
    SessionTruth, VerifierTruth, REPORT_FMT, REPORT_VERSION,
};
