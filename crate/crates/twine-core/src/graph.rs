//! Partial-order proofs over the tapestry.
//!
//! A pulse hash-links to earlier pulses through its `links` (same chain) and
//! `mixins` (other chains). If a chain of such links connects two pulses,
//! the one reached by walking backwards is provably earlier.

use std::collections::{HashMap, VecDeque};

use crate::cid::{default_cid, Cid};
use crate::error::Result;
use crate::record::Pulse;
use crate::resolver::Resolver;

/// A verified hash path between two pulses. `path[0]` is the later pulse,
/// each element hash-links to the next, and the last element is the earlier
/// pulse.
#[derive(Debug, Clone)]
pub struct OrderProof {
    pub earlier: Cid,
    pub later: Cid,
    pub path: Vec<Cid>,
}

/// Which input of [`prove_order`] turned out to be the earlier pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProofDirection {
    FirstEarlier,
    SecondEarlier,
}

impl OrderProof {
    pub fn direction(&self, a: &Cid) -> ProofDirection {
        if &self.earlier == a {
            ProofDirection::FirstEarlier
        } else {
            ProofDirection::SecondEarlier
        }
    }
}

fn backward_edges(pulse: &Pulse) -> Vec<Cid> {
    let mut out: Vec<Cid> = pulse.links.clone();
    out.extend(pulse.mixins.iter().map(|m| m.pulse.clone()));
    out
}

/// Breadth-first search backwards from `from` for `target`; returns the
/// shortest hash path `[from, ..., target]` if one exists.
fn search(resolver: &dyn Resolver, from: &Cid, target: &Cid) -> Result<Option<Vec<Cid>>> {
    if from == target {
        return Ok(Some(vec![from.clone()]));
    }
    let mut parent: HashMap<Cid, Cid> = HashMap::new();
    let mut queue = VecDeque::new();
    queue.push_back(from.clone());
    parent.insert(from.clone(), from.clone());
    while let Some(cur) = queue.pop_front() {
        let Some(bytes) = resolver.fetch(&cur)? else {
            continue;
        };
        let Ok(pulse) = Pulse::from_bytes(&bytes) else {
            continue;
        };
        for next in backward_edges(&pulse) {
            if parent.contains_key(&next) {
                continue;
            }
            parent.insert(next.clone(), cur.clone());
            if &next == target {
                let mut path = vec![next.clone()];
                let mut node = cur;
                loop {
                    path.push(node.clone());
                    if node == *from {
                        break;
                    }
                    node = parent[&node].clone();
                }
                path.reverse();
                return Ok(Some(path));
            }
            queue.push_back(next);
        }
    }
    Ok(None)
}

/// Try to prove an order between two pulses. Returns `None` when no hash
/// path connects them in either direction.
pub fn prove_order(a: &Cid, b: &Cid, resolver: &dyn Resolver) -> Result<Option<OrderProof>> {
    if let Some(path) = search(resolver, a, b)? {
        return Ok(Some(OrderProof {
            earlier: b.clone(),
            later: a.clone(),
            path,
        }));
    }
    if let Some(path) = search(resolver, b, a)? {
        return Ok(Some(OrderProof {
            earlier: a.clone(),
            later: b.clone(),
            path,
        }));
    }
    Ok(None)
}

/// Re-verify a proof from raw stored bytes: every adjacent pair must be a
/// genuine hash link and the endpoints must match.
pub fn verify_order_proof(proof: &OrderProof, resolver: &dyn Resolver) -> Result<bool> {
    if proof.path.first() != Some(&proof.later) || proof.path.last() != Some(&proof.earlier) {
        return Ok(false);
    }
    for pair in proof.path.windows(2) {
        let Some(bytes) = resolver.fetch(&pair[0])? else {
            return Ok(false);
        };
        match default_cid(&bytes) {
            Ok(c) if c == pair[0] => {}
            _ => return Ok(false),
        }
        let Ok(pulse) = Pulse::from_bytes(&bytes) else {
            return Ok(false);
        };
        if !backward_edges(&pulse).contains(&pair[1]) {
            return Ok(false);
        }
    }
    Ok(true)
}
