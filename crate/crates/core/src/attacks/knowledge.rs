use std::fmt;

use arrayvec::ArrayVec;
use std::hash::BuildHasher;

use hashbrown::HashTable;
use rustc_hash::FxBuildHasher;
use serde::{Deserialize, Serialize};

use crate::crypto::{Block, HashAlg, Hasher, BLOCK_LEN};
use crate::netsim::{Channel, Ephemerals, TranscriptEntry};
use crate::protocol::{MessageKind, SmartCardStore};

/// Largest hash arity the engine will enumerate.
pub const MAX_ARITY: usize = 5;
/// Largest depth accepted by [`closure`] and [`derivable`].
pub const MAX_DEPTH: u8 = 3;
/// Default cap on the number of terms a closure may hold.
pub const DEFAULT_BUDGET: usize = 4_000_000;

/// An attacker-known value. 32-byte strings are always Blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Block(Block),
    Bytes(Vec<u8>),
}

impl Term {
    pub fn from_bytes(bytes: &[u8]) -> Term {
        match Block::from_slice(bytes) {
            Some(b) => Term::Block(b),
            None => Term::Bytes(bytes.to_vec()),
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        match self {
            Term::Block(b) => b.as_bytes(),
            Term::Bytes(v) => v,
        }
    }

    pub fn as_block(&self) -> Option<&Block> {
        match self {
            Term::Block(b) => Some(b),
            Term::Bytes(_) => None,
        }
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.as_bytes())
    }
}

impl From<Block> for Term {
    fn from(b: Block) -> Self {
        Term::Block(b)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Transcript,
    Leak,
    CardDump,
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Xor,
    Hash,
}

/// How a term entered the set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Given {
        provenance: Provenance,
        label: Option<String>,
    },
    Derived {
        rule: Rule,
        parents: ArrayVec<u32, MAX_ARITY>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub term: Term,
    pub origin: Origin,
    /// Closure level at which the term first appeared.
    pub level: u8,
}

/// One derivation step, with parents and result as hex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub rule: Rule,
    pub parents: Vec<String>,
    pub result: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClosureError {
    #[error("depth {0} exceeds the bound of {MAX_DEPTH}")]
    DepthTooLarge(u8),
    #[error("arity must be between 1 and {MAX_ARITY}, got {0}")]
    BadArity(usize),
    #[error("term budget of {budget} exceeded; closure is partial")]
    BudgetExceeded {
        budget: usize,
        partial: Box<KnowledgeSet>,
    },
    #[error("supplied preimage does not hash to the target")]
    BadPreimage,
}

impl ClosureError {
    pub fn partial(&self) -> Option<&KnowledgeSet> {
        match self {
            ClosureError::BudgetExceeded { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClosureParams {
    pub depth: u8,
    pub max_arity: usize,
    pub budget: usize,
    pub hash: HashAlg,
}

impl ClosureParams {
    pub fn new(depth: u8) -> Self {
        ClosureParams {
            depth,
            max_arity: MAX_ARITY,
            budget: DEFAULT_BUDGET,
            hash: HashAlg::Sha256,
        }
    }

    pub fn arity(self, max_arity: usize) -> Self {
        ClosureParams { max_arity, ..self }
    }

    pub fn budget(self, budget: usize) -> Self {
        ClosureParams { budget, ..self }
    }

    pub fn hash(self, hash: HashAlg) -> Self {
        ClosureParams { hash, ..self }
    }

    fn validate(&self) -> Result<(), ClosureError> {
        if self.depth > MAX_DEPTH {
            return Err(ClosureError::DepthTooLarge(self.depth));
        }
        if self.max_arity == 0 || self.max_arity > MAX_ARITY {
            return Err(ClosureError::BadArity(self.max_arity));
        }
        Ok(())
    }
}

/// Terms known to the attacker, each with the reason it is known.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeSet {
    entries: Vec<Entry>,
    /// Positions in `entries`, hashed by term.
    index: HashTable<u32>,
    complete: bool,
}

fn term_hash(t: &Term) -> u64 {
    match t {
        // digests and nonces are already uniform
        Term::Block(b) => u64::from_le_bytes(b.0[..8].try_into().expect("8 bytes")),
        Term::Bytes(_) => FxBuildHasher.hash_one(t),
    }
}

impl PartialEq for KnowledgeSet {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries && self.complete == other.complete
    }
}

impl Eq for KnowledgeSet {}

impl KnowledgeSet {
    pub fn new() -> Self {
        KnowledgeSet {
            complete: true,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// False when a budget cut the closure short.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn contains(&self, term: &Term) -> bool {
        self.position(term).is_some()
    }

    pub fn contains_block(&self, b: &Block) -> bool {
        self.contains(&Term::Block(*b))
    }

    pub fn position(&self, term: &Term) -> Option<usize> {
        self.index
            .find(term_hash(term), |&i| self.entries[i as usize].term == *term)
            .map(|&i| i as usize)
    }

    fn reserve(&mut self, additional: usize) {
        self.entries.reserve(additional);
        let entries = &self.entries;
        self.index
            .reserve(additional, |&i| term_hash(&entries[i as usize].term));
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.entries.iter().map(|e| &e.term)
    }

    /// Add a given term. Returns false if it was already known.
    pub fn insert(&mut self, term: Term, provenance: Provenance, label: Option<&str>) -> bool {
        let origin = Origin::Given {
            provenance,
            label: label.map(str::to_string),
        };
        self.push(term, origin, 0)
    }

    pub fn insert_block(&mut self, b: Block, provenance: Provenance, label: &str) -> bool {
        self.insert(Term::Block(b), provenance, Some(label))
    }

    fn push(&mut self, term: Term, origin: Origin, level: u8) -> bool {
        let next = self.entries.len() as u32;
        let entries = &self.entries;
        match self.index.entry(
            term_hash(&term),
            |&i| entries[i as usize].term == term,
            |&i| term_hash(&entries[i as usize].term),
        ) {
            hashbrown::hash_table::Entry::Occupied(_) => false,
            hashbrown::hash_table::Entry::Vacant(v) => {
                v.insert(next);
                self.entries.push(Entry {
                    term,
                    origin,
                    level,
                });
                true
            }
        }
    }

    /// Index entries appended from `from` on, dropping repeats.
    fn index_from(&mut self, from: usize) {
        let mut write = from;
        for read in from..self.entries.len() {
            let hash = term_hash(&self.entries[read].term);
            let entries = &self.entries;
            let known = self
                .index
                .find(hash, |&i| entries[i as usize].term == entries[read].term)
                .is_some();
            if !known {
                self.entries.swap(write, read);
                let entries = &self.entries;
                self.index.insert_unique(hash, write as u32, |&i| {
                    term_hash(&entries[i as usize].term)
                });
                write += 1;
            }
        }
        self.entries.truncate(write);
    }

    /// Given terms of `other` are added; derived ones are skipped.
    pub fn extend_given(&mut self, other: &KnowledgeSet) {
        for e in &other.entries {
            if let Origin::Given { provenance, label } = &e.origin {
                self.insert(e.term.clone(), *provenance, label.as_deref());
            }
        }
    }

    /// Every Block and timestamp carried by decodable authentication frames
    /// on the public channel.
    pub fn from_view(view: &[TranscriptEntry]) -> KnowledgeSet {
        let mut set = KnowledgeSet::new();
        for entry in view.iter().filter(|e| e.channel == Channel::Public) {
            let frame = &entry.payload;
            let Some(kind) = frame.first().copied().and_then(MessageKind::from_tag) else {
                continue;
            };
            let Some(ts) = kind.timestamp_offset() else {
                continue;
            };
            if frame.len() != ts + 8 {
                continue;
            }
            for field in kind.block_fields() {
                let off = kind.field_offset(field).expect("listed field");
                let label = format!("{}#{}.{}", kind.name(), entry.seq, field);
                set.insert(
                    Term::from_bytes(&frame[off..off + BLOCK_LEN]),
                    Provenance::Transcript,
                    Some(&label),
                );
            }
            let label = format!("{}#{}.t", kind.name(), entry.seq);
            set.insert(
                Term::Bytes(frame[ts..].to_vec()),
                Provenance::Transcript,
                Some(&label),
            );
        }
        set
    }

    pub fn from_leak(leak: &Ephemerals) -> KnowledgeSet {
        let mut set = KnowledgeSet::new();
        set.insert_block(leak.r_u, Provenance::Leak, "r_u");
        set.insert_block(leak.r_g, Provenance::Leak, "r_g");
        set.insert_block(leak.r_s, Provenance::Leak, "r_s");
        set
    }

    /// Stored Blocks of a smart card. The helper data is not a Block and is left out.
    pub fn from_card(card: &SmartCardStore) -> KnowledgeSet {
        let mut set = KnowledgeSet::new();
        for (label, b) in card.blocks() {
            set.insert_block(b, Provenance::CardDump, label);
        }
        set
    }

    /// Recompute a term from its recorded parents, recursively down to given terms.
    pub fn replay(&self, idx: usize, hash: HashAlg) -> Option<Term> {
        let e = self.entries.get(idx)?;
        match &e.origin {
            Origin::Given { .. } => Some(e.term.clone()),
            Origin::Derived { rule, parents } => {
                let ps: Option<Vec<Term>> = parents
                    .iter()
                    .map(|&p| self.replay(p as usize, hash))
                    .collect();
                apply_rule(*rule, &ps?, hash)
            }
        }
    }

    /// Derivation steps needed to obtain entry `idx`, parents first.
    pub fn trace(&self, idx: usize) -> Vec<TraceStep> {
        let mut seen = vec![false; self.entries.len()];
        let mut out = Vec::new();
        self.collect_trace(idx, &mut seen, &mut out);
        out
    }

    fn collect_trace(&self, idx: usize, seen: &mut [bool], out: &mut Vec<TraceStep>) {
        if seen[idx] {
            return;
        }
        seen[idx] = true;
        let e = &self.entries[idx];
        if let Origin::Derived { rule, parents } = &e.origin {
            for &p in parents {
                self.collect_trace(p as usize, seen, out);
            }
            out.push(TraceStep {
                rule: *rule,
                parents: parents
                    .iter()
                    .map(|&p| self.entries[p as usize].term.to_hex())
                    .collect(),
                result: e.term.to_hex(),
            });
        }
    }

    pub fn label(&self, term: &Term) -> Option<&str> {
        match &self.entries[self.position(term)?].origin {
            Origin::Given { label, .. } => label.as_deref(),
            Origin::Derived { .. } => None,
        }
    }
}

pub fn apply_rule(rule: Rule, parents: &[Term], hash: HashAlg) -> Option<Term> {
    match rule {
        Rule::Xor => match parents {
            [Term::Block(a), Term::Block(b)] => Some(Term::Block(a.xor(b))),
            _ => None,
        },
        Rule::Hash => {
            if parents.is_empty() || parents.len() > MAX_ARITY {
                return None;
            }
            let mut h = hash.hasher();
            for p in parents {
                h.update(p.as_bytes());
            }
            Some(Term::Block(h.finalize()))
        }
    }
}

/// Saturate `initial` under pairwise XOR and hashing of ordered tuples,
/// `params.depth` times.
pub fn closure(
    initial: &KnowledgeSet,
    params: ClosureParams,
) -> Result<KnowledgeSet, ClosureError> {
    params.validate()?;
    let mut set = initial.clone();
    set.complete = true;
    for level in 1..=params.depth {
        expand(&mut set, level, params)?;
    }
    Ok(set)
}

fn over_budget(set: &mut KnowledgeSet, params: ClosureParams) -> Result<(), ClosureError> {
    if set.entries.len() > params.budget {
        set.complete = false;
        return Err(ClosureError::BudgetExceeded {
            budget: params.budget,
            partial: Box::new(std::mem::take(set)),
        });
    }
    Ok(())
}

fn expand(set: &mut KnowledgeSet, level: u8, params: ClosureParams) -> Result<(), ClosureError> {
    let n = set.entries.len();
    let blocks: Vec<u32> = (0..n as u32)
        .filter(|&i| set.entries[i as usize].term.as_block().is_some())
        .collect();
    for (k, &i) in blocks.iter().enumerate() {
        for &j in &blocks[k..] {
            let a = set.entries[i as usize]
                .term
                .as_block()
                .copied()
                .expect("block index");
            let b = set.entries[j as usize]
                .term
                .as_block()
                .copied()
                .expect("block index");
            let parents = ArrayVec::from_iter([i, j]);
            set.push(
                Term::Block(a.xor(&b)),
                Origin::Derived {
                    rule: Rule::Xor,
                    parents,
                },
                level,
            );
        }
        over_budget(set, params)?;
    }
    let base: Vec<Term> = set.entries[..n].iter().map(|e| e.term.clone()).collect();
    set.reserve(tuple_count(n, params.max_arity).min(params.budget as u128) as usize);
    let mut stack = ArrayVec::<u32, MAX_ARITY>::new();
    let mut indexed = set.entries.len();
    let mut exceeded = false;
    enumerate_tuples(
        &base,
        params,
        &mut stack,
        params.hash.hasher(),
        &mut |tuple, digest| {
            let origin = Origin::Derived {
                rule: Rule::Hash,
                parents: tuple.clone(),
            };
            set.entries.push(Entry {
                term: Term::Block(digest),
                origin,
                level,
            });
            if set.entries.len() > params.budget {
                set.index_from(indexed);
                indexed = set.entries.len();
                exceeded = indexed > params.budget;
            }
            !exceeded
        },
    );
    set.index_from(indexed);
    over_budget(set, params)
}

fn tuple_count(n: usize, max_arity: usize) -> u128 {
    (1..=max_arity as u32)
        .map(|k| (n as u128).saturating_pow(k))
        .sum()
}

/// Visit every ordered tuple over `base` of arity 1..=max_arity with its hash.
/// Prefix hasher states are shared between siblings. The visitor returns
/// false to stop.
fn enumerate_tuples<F>(
    base: &[Term],
    params: ClosureParams,
    stack: &mut ArrayVec<u32, MAX_ARITY>,
    prefix: Hasher,
    visit: &mut F,
) -> bool
where
    F: FnMut(&ArrayVec<u32, MAX_ARITY>, Block) -> bool,
{
    for (i, t) in base.iter().enumerate() {
        let mut h = prefix.clone();
        h.update(t.as_bytes());
        stack.push(i as u32);
        let go_on = if stack.len() == params.max_arity {
            visit(stack, h.finalize())
        } else {
            visit(stack, h.clone().finalize()) && enumerate_tuples(base, params, stack, h, visit)
        };
        stack.pop();
        if !go_on {
            return false;
        }
    }
    true
}

/// What the attacker is trying to obtain. `preimage`, when known, is the byte
/// string whose hash is the target; it lets the last hashing level be decided
/// without enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub value: Block,
    pub preimage: Option<Vec<u8>>,
}

impl Target {
    pub fn block(value: Block) -> Self {
        Target {
            value,
            preimage: None,
        }
    }

    pub fn with_preimage(value: Block, preimage: Vec<u8>) -> Self {
        Target {
            value,
            preimage: Some(preimage),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivability {
    pub derivable: bool,
    /// Size of the closure one level below the requested depth.
    pub examined: usize,
    pub trace: Vec<TraceStep>,
}

/// Whether `target` lies in `closure(initial, depth)`.
///
/// The closure is materialized to `depth - 1`; the last level is checked
/// directly. An XOR hit needs `target ^ a` known for some known `a`. A hash
/// hit, given a preimage, needs the preimage to split into at most
/// `max_arity` known terms; this is exact for a collision-resistant hash.
/// Without a preimage the last level is enumerated, within the budget.
pub fn derivable(
    initial: &KnowledgeSet,
    target: &Target,
    params: ClosureParams,
) -> Result<Derivability, ClosureError> {
    params.validate()?;
    if let Some(p) = &target.preimage {
        if params.hash.h(&[p]) != target.value {
            return Err(ClosureError::BadPreimage);
        }
    }
    let goal = Term::Block(target.value);
    if params.depth == 0 {
        let hit = initial.position(&goal);
        return Ok(Derivability {
            derivable: hit.is_some(),
            examined: initial.len(),
            trace: hit.map(|i| initial.trace(i)).unwrap_or_default(),
        });
    }
    let base = closure(
        initial,
        ClosureParams {
            depth: params.depth - 1,
            ..params
        },
    )?;
    let found = |trace| {
        Ok(Derivability {
            derivable: true,
            examined: base.len(),
            trace,
        })
    };

    if let Some(i) = base.position(&goal) {
        return found(base.trace(i));
    }
    for (i, e) in base.entries.iter().enumerate() {
        let Some(a) = e.term.as_block() else { continue };
        if let Some(j) = base.position(&Term::Block(target.value.xor(a))) {
            return found(top_step(&base, Rule::Xor, &[i, j], &target.value));
        }
    }
    match &target.preimage {
        Some(p) => {
            if let Some(parts) = split_into_known(&base, p, params.max_arity) {
                return found(top_step(&base, Rule::Hash, &parts, &target.value));
            }
        }
        None => {
            let n = base.len();
            if tuple_count(n, params.max_arity) + n as u128 > params.budget as u128 {
                let mut partial = base;
                partial.complete = false;
                return Err(ClosureError::BudgetExceeded {
                    budget: params.budget,
                    partial: Box::new(partial),
                });
            }
            let terms: Vec<Term> = base.terms().cloned().collect();
            let mut hit = None;
            let mut stack = ArrayVec::new();
            enumerate_tuples(
                &terms,
                params,
                &mut stack,
                params.hash.hasher(),
                &mut |tuple, d| {
                    if d == target.value {
                        hit = Some(tuple.iter().map(|&i| i as usize).collect::<Vec<_>>());
                        return false;
                    }
                    true
                },
            );
            if let Some(parts) = hit {
                return found(top_step(&base, Rule::Hash, &parts, &target.value));
            }
        }
    }
    Ok(Derivability {
        derivable: false,
        examined: base.len(),
        trace: Vec::new(),
    })
}

fn top_step(base: &KnowledgeSet, rule: Rule, parents: &[usize], result: &Block) -> Vec<TraceStep> {
    let mut seen = vec![false; base.len()];
    let mut out = Vec::new();
    for &p in parents {
        base.collect_trace(p, &mut seen, &mut out);
    }
    out.push(TraceStep {
        rule,
        parents: parents
            .iter()
            .map(|&p| base.entries[p].term.to_hex())
            .collect(),
        result: result.to_hex(),
    });
    out
}

/// Fewest-chunk split of `bytes` into known terms, if one uses at most `max_parts`.
fn split_into_known(set: &KnowledgeSet, bytes: &[u8], max_parts: usize) -> Option<Vec<usize>> {
    let mut lengths: Vec<usize> = set
        .terms()
        .map(|t| t.as_bytes().len())
        .filter(|&l| l > 0)
        .collect();
    lengths.sort_unstable();
    lengths.dedup();
    // best[p] = (chunks, last term index, previous position)
    let mut best: Vec<Option<(usize, usize, usize)>> = vec![None; bytes.len() + 1];
    best[0] = Some((0, usize::MAX, 0));
    for p in 0..bytes.len() {
        let Some((count, _, _)) = best[p] else {
            continue;
        };
        for &l in &lengths {
            let q = p + l;
            if q > bytes.len() {
                break;
            }
            if let Some(idx) = set.position(&Term::from_bytes(&bytes[p..q])) {
                if best[q].is_none_or(|(c, _, _)| c > count + 1) {
                    best[q] = Some((count + 1, idx, p));
                }
            }
        }
    }
    let (count, _, _) = best[bytes.len()]?;
    if count == 0 || count > max_parts {
        return None;
    }
    let mut parts = Vec::with_capacity(count);
    let mut q = bytes.len();
    while q > 0 {
        let (_, idx, p) = best[q].expect("reachable");
        parts.push(idx);
        q = p;
    }
    parts.reverse();
    Some(parts)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::crypto::{h, SeededRng};

    fn blocks(n: usize, seed: u8) -> Vec<Block> {
        let mut rng = SeededRng::new([seed; 32]);
        (0..n).map(|_| rng.next_block()).collect()
    }

    fn set_of(bs: &[Block]) -> KnowledgeSet {
        let mut s = KnowledgeSet::new();
        for (i, b) in bs.iter().enumerate() {
            s.insert_block(*b, Provenance::Leak, &format!("k{i}"));
        }
        s
    }

    /// Independent saturation over plain byte strings.
    fn naive_closure(init: &[Vec<u8>], depth: u8, arity: usize) -> BTreeSet<Vec<u8>> {
        let mut known: BTreeSet<Vec<u8>> = init.iter().cloned().collect();
        for _ in 0..depth {
            let cur: Vec<Vec<u8>> = known.iter().cloned().collect();
            let mut next = known.clone();
            for a in cur.iter().filter(|a| a.len() == 32) {
                for b in cur.iter().filter(|b| b.len() == 32) {
                    next.insert(a.iter().zip(b).map(|(x, y)| x ^ y).collect());
                }
            }
            let mut tuples: Vec<Vec<u8>> = vec![Vec::new()];
            for _ in 0..arity {
                let mut longer = Vec::new();
                for t in &tuples {
                    for c in &cur {
                        let mut u = t.clone();
                        u.extend_from_slice(c);
                        next.insert(h(&[&u]).0.to_vec());
                        longer.push(u);
                    }
                }
                tuples = longer;
            }
            known = next;
        }
        known
    }

    fn bytes_of(set: &KnowledgeSet) -> BTreeSet<Vec<u8>> {
        set.terms().map(|t| t.as_bytes().to_vec()).collect()
    }

    #[test]
    fn micro_instance_matches_brute_force() {
        let bs = blocks(3, 1);
        let init: Vec<Vec<u8>> = bs.iter().map(|b| b.0.to_vec()).collect();
        for depth in 0..=2 {
            let engine = closure(&set_of(&bs), ClosureParams::new(depth).arity(2)).unwrap();
            assert_eq!(
                bytes_of(&engine),
                naive_closure(&init, depth, 2),
                "depth {depth}"
            );
        }
        let sk = h(&[&bs[0].0, &bs[1].0, &bs[2].0]);
        let c2 = naive_closure(&init, 2, 2);
        assert!(!c2.contains(sk.0.as_slice()));
        let preimage = [bs[0].0, bs[1].0, bs[2].0].concat();
        let d = derivable(
            &set_of(&bs),
            &Target::with_preimage(sk, preimage),
            ClosureParams::new(2).arity(2),
        )
        .unwrap();
        assert!(!d.derivable);
        let nested = h(&[&h(&[&bs[0].0]).0, &bs[1].0]);
        assert!(c2.contains(nested.0.as_slice()));
        let d = derivable(
            &set_of(&bs),
            &Target::block(nested),
            ClosureParams::new(2).arity(2),
        )
        .unwrap();
        assert!(d.derivable);
        assert_eq!(d.trace.len(), 2);
    }

    #[test]
    fn derivable_agrees_with_closure_membership() {
        let bs = blocks(3, 2);
        let init = set_of(&bs);
        let full = closure(&init, ClosureParams::new(2).arity(2)).unwrap();
        for e in full.entries().iter().step_by(17) {
            let Some(b) = e.term.as_block() else { continue };
            let d = derivable(&init, &Target::block(*b), ClosureParams::new(2).arity(2)).unwrap();
            assert!(d.derivable);
        }
        let outsider = blocks(1, 99)[0];
        let d = derivable(
            &init,
            &Target::block(outsider),
            ClosureParams::new(2).arity(2),
        )
        .unwrap();
        assert!(!d.derivable);
    }

    #[test]
    fn leak_gives_sk_at_depth_one() {
        let bs = blocks(3, 3);
        let sk = h(&[&bs[0].0, &bs[1].0, &bs[2].0]);
        let c1 = closure(&set_of(&bs), ClosureParams::new(1)).unwrap();
        assert!(c1.contains_block(&sk));
        let i = c1.position(&Term::Block(sk)).unwrap();
        let trace = c1.trace(i);
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0].rule, Rule::Hash);
        assert_eq!(trace[0].parents.len(), 3);
    }

    #[test]
    fn self_xor_gives_zero() {
        let c1 = closure(&set_of(&blocks(1, 4)), ClosureParams::new(1).arity(1)).unwrap();
        assert!(c1.contains_block(&Block::ZERO));
    }

    #[test]
    fn every_term_replays() {
        let bs = blocks(3, 5);
        let mut init = set_of(&bs);
        init.insert(
            Term::Bytes(vec![0, 0, 0, 0, 0, 0, 0, 7]),
            Provenance::Transcript,
            Some("t"),
        );
        let c = closure(&init, ClosureParams::new(2).arity(2)).unwrap();
        for (i, e) in c.entries().iter().enumerate() {
            assert_eq!(c.replay(i, HashAlg::Sha256).as_ref(), Some(&e.term));
        }
    }

    #[test]
    fn closure_is_monotone() {
        let bs = blocks(4, 6);
        let small = set_of(&bs[..2]);
        let big = set_of(&bs);
        let p = ClosureParams::new(1).arity(2);
        let c1 = bytes_of(&closure(&small, p).unwrap());
        let c2 = bytes_of(&closure(&small, ClosureParams::new(2).arity(2)).unwrap());
        let c1_big = bytes_of(&closure(&big, p).unwrap());
        assert!(c1.is_subset(&c2));
        assert!(c1.is_subset(&c1_big));
    }

    #[test]
    fn budget_exceeded_returns_partial() {
        let err = closure(&set_of(&blocks(4, 7)), ClosureParams::new(2).budget(1000)).unwrap_err();
        let partial = err.partial().unwrap();
        assert!(!partial.is_complete());
        assert!(partial.len() > 1000);
        let err = derivable(
            &set_of(&blocks(4, 7)),
            &Target::block(Block::ZERO.flip_bit(1)),
            ClosureParams::new(3).budget(1000),
        )
        .unwrap_err();
        assert!(matches!(err, ClosureError::BudgetExceeded { .. }));
    }

    #[test]
    fn bounds_enforced() {
        let s = set_of(&blocks(1, 8));
        assert_eq!(
            closure(&s, ClosureParams::new(4)),
            Err(ClosureError::DepthTooLarge(4))
        );
        assert_eq!(
            closure(&s, ClosureParams::new(1).arity(6)),
            Err(ClosureError::BadArity(6))
        );
        let t = Target::with_preimage(Block::ZERO, vec![1]);
        assert_eq!(
            derivable(&s, &t, ClosureParams::new(1)),
            Err(ClosureError::BadPreimage)
        );
    }

    #[test]
    fn preimage_split_uses_timestamps() {
        let bs = blocks(2, 9);
        let mut init = set_of(&bs);
        let ts = vec![0u8, 0, 0, 0, 0, 0, 0, 3];
        init.insert(Term::Bytes(ts.clone()), Provenance::Transcript, None);
        let pre = [&ts[..], &bs[0].0, &bs[1].0].concat();
        let target = Target::with_preimage(h(&[&pre]), pre);
        let d = derivable(&init, &target, ClosureParams::new(1)).unwrap();
        assert!(d.derivable);
        assert_eq!(d.trace.last().unwrap().parents.len(), 3);
    }
}
