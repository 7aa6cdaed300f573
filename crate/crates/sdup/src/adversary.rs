//! Eavesdropper models over completed simulation traces.
//!
//! Two bracketing attackers are provided. ORACLE is granted the frame
//! permutation and anchor identity (the structural half of the key
//! material) but not the keystream; its success is the conservative
//! structural upper bound "at least k shares recoverable from what was
//! captured". BLIND is granted nothing but the captured frames and must
//! discover the arrangement itself; success requires a unique passing
//! assignment that is also the true one, so BLIND success implies ORACLE
//! success by construction. `interception_probability` computes the exact
//! capture probability analytically for static topologies as a
//! cross-check on the empirical rates.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use thiserror::Error;

use crate::codec::{frame_count, recoverable_slots, Frame, Permutation};
use crate::route::{Path, RedundancyPlan};
use crate::sim::{Topology, TraceEvent};

/// Exhaustive assignment search is exponential; refuse past this n.
pub const BLIND_EXHAUSTIVE_BOUND: u8 = 6;
/// Exact compromise enumeration is 2^j; refuse past this many nodes.
pub const ENUMERATION_BOUND: usize = 20;

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("blind attack model limit: n={0} exceeds exhaustive bound {BLIND_EXHAUSTIVE_BOUND}")]
    ModelLimit(u8),
    #[error("interception enumeration limit: {0} involved nodes exceed {ENUMERATION_BOUND}")]
    EnumerationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackerModel {
    Oracle,
    Blind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CapturedFrame {
    pub session_id: u32,
    pub wire_pos: u16,
    pub body: Vec<u8>,
}

/// What each compromised node observed, either as a relay or by
/// overhearing a neighbor's transmission.
#[derive(Debug, Default, Clone)]
pub struct CaptureLog {
    pub by_node: BTreeMap<u32, BTreeSet<CapturedFrame>>,
}

impl CaptureLog {
    pub fn is_empty(&self) -> bool {
        self.by_node.values().all(|s| s.is_empty())
    }

    /// All captured frames of one session, pooled across nodes and
    /// deduplicated by wire position.
    pub fn pooled(&self, session_id: u32) -> BTreeMap<u16, Vec<u8>> {
        let mut out = BTreeMap::new();
        for set in self.by_node.values() {
            for cf in set.iter().filter(|cf| cf.session_id == session_id) {
                out.entry(cf.wire_pos).or_insert_with(|| cf.body.clone());
            }
        }
        out
    }

    pub fn insert(&mut self, node: u32, frame: &Frame) {
        self.by_node.entry(node).or_default().insert(CapturedFrame {
            session_id: frame.session_id,
            wire_pos: frame.wire_pos,
            body: frame.body.clone(),
        });
    }
}

/// Replay a trace and log every frame a compromised node successfully
/// received or overheard. Collided or channel-lost receptions were never
/// decodable and are not captured.
pub fn capture_frames(trace: &[TraceEvent], frames: &[Frame], topology: &Topology) -> CaptureLog {
    let mut log = CaptureLog::default();
    let compromised = |id: u32| topology.node(id).map(|n| n.compromised).unwrap_or(false);
    for ev in trace {
        let (node, frame_idx) = match *ev {
            TraceEvent::Delivered { receiver, frame_idx, .. } => (receiver, frame_idx),
            TraceEvent::Overheard { node, frame_idx, .. } => (node, frame_idx),
            _ => continue,
        };
        if compromised(node) {
            log.insert(node, &frames[frame_idx]);
        }
    }
    log
}

fn slot_presence(
    captured: &BTreeMap<u16, Vec<u8>>,
    perm: &Permutation,
    n: u8,
) -> (bool, BTreeSet<usize>) {
    let mut anchor = false;
    let mut ring = BTreeSet::new();
    for &wp in captured.keys() {
        match perm.wire_to_slot(wp) {
            Some(0) => anchor = true,
            Some(s) => {
                ring.insert(s - 1);
            }
            None => {}
        }
    }
    let _ = n;
    (anchor, ring)
}

/// Structural upper bound: with the permutation granted, does the pooled
/// capture recover at least k shares?
pub fn oracle_attack(
    log: &CaptureLog,
    perm: &Permutation,
    session_id: u32,
    n: u8,
    k: u8,
) -> bool {
    let captured = log.pooled(session_id);
    let (anchor, ring) = slot_presence(&captured, perm, n);
    recoverable_slots(anchor, &ring, n as usize).len() >= k as usize
}

/// Does one injective assignment of captured frames to slots pass the
/// checks available to an attacker without the permutation?
///
/// Two checks exist: structural recoverability of >= k shares, and the
/// ring telescoping identity (the XOR of all n ring frames is zero), which
/// is only testable when every ring slot is filled.
fn assignment_passes(bodies: &[&[u8]], slots: &[usize], n: u8, k: u8) -> bool {
    let anchor = slots.contains(&0);
    let ring: BTreeSet<usize> = slots.iter().filter(|&&s| s > 0).map(|&s| s - 1).collect();
    if recoverable_slots(anchor, &ring, n as usize).len() < k as usize {
        return false;
    }
    if ring.len() == n as usize && n >= 1 {
        let mut acc = vec![0u8; bodies[0].len()];
        for (i, &slot) in slots.iter().enumerate() {
            if slot > 0 {
                if bodies[i].len() != acc.len() {
                    return false;
                }
                for (a, b) in acc.iter_mut().zip(bodies[i]) {
                    *a ^= b;
                }
            }
        }
        if acc.iter().any(|&b| b != 0) {
            return false;
        }
    }
    true
}

/// Lower-bound attacker: no permutation knowledge. The attack succeeds
/// only when exhaustive search finds exactly one passing assignment and
/// that assignment is the true one — otherwise the attacker cannot commit
/// to a decoding. `truth` is used solely to score the attempt.
pub fn blind_attack(
    log: &CaptureLog,
    truth: &Permutation,
    session_id: u32,
    n: u8,
    k: u8,
) -> Result<bool, AdversaryError> {
    if n > BLIND_EXHAUSTIVE_BOUND {
        return Err(AdversaryError::ModelLimit(n));
    }
    let captured = log.pooled(session_id);
    if captured.is_empty() {
        return Ok(false);
    }
    let m = frame_count(n as usize);
    let wires: Vec<u16> = captured.keys().copied().collect();
    let bodies: Vec<&[u8]> = wires.iter().map(|w| captured[w].as_slice()).collect();
    if wires.len() > m {
        return Ok(false); // foreign frames mixed in; not this session's shape
    }

    let mut passing = 0usize;
    let mut unique_matches_truth = false;
    for slots in (0..m).permutations(wires.len()) {
        if !assignment_passes(&bodies, &slots, n, k) {
            continue;
        }
        passing += 1;
        if passing > 1 {
            return Ok(false);
        }
        unique_matches_truth =
            wires.iter().zip(&slots).all(|(&w, &s)| truth.wire_to_slot(w) == Some(s));
    }
    Ok(passing == 1 && unique_matches_truth)
}

/// Exact interception probability for a static topology, enumerating
/// compromise outcomes over every involved intermediate node.
///
/// The model is lossless full capture: a compromised node hears every
/// frame of any path for which it relays or is in range of a transmitter,
/// and every frame crosses every hop of its path. Endpoints are trusted.
pub fn interception_probability(
    topology: &Topology,
    paths: &[Path],
    plan: &RedundancyPlan,
    attacker: AttackerModel,
) -> Result<f64, AdversaryError> {
    if paths.is_empty() {
        return Ok(0.0);
    }
    let src = paths[0].source();
    let dst = paths[0].destination();

    // Per path: transmitters are every node but the destination.
    let transmitters: Vec<Vec<u32>> =
        paths.iter().map(|p| p.0[..p.0.len() - 1].to_vec()).collect();

    let mut involved: BTreeSet<u32> = BTreeSet::new();
    for (p, txs) in paths.iter().zip(&transmitters) {
        for &relay in p.intermediates() {
            involved.insert(relay);
        }
        for node in topology.node_ids() {
            if node == src || node == dst {
                continue;
            }
            if txs.iter().any(|&t| topology.linked(t, node)) {
                involved.insert(node);
            }
        }
    }
    let involved: Vec<u32> = involved.into_iter().collect();
    if involved.len() > ENUMERATION_BOUND {
        return Err(AdversaryError::EnumerationLimit(involved.len()));
    }

    let m = frame_count(plan.n as usize);
    let hears_path = |node: u32, pi: usize| -> bool {
        paths[pi].intermediates().contains(&node)
            || transmitters[pi].iter().any(|&t| topology.linked(t, node))
    };

    let probs: Vec<f64> = involved
        .iter()
        .map(|&id| topology.node(id).map(|n| n.compromise_prob).unwrap_or(0.0))
        .collect();

    let mut total = 0.0;
    for outcome in 0u32..(1u32 << involved.len()) {
        let mut p_outcome = 1.0;
        for (bit, &pr) in probs.iter().enumerate() {
            p_outcome *= if outcome >> bit & 1 == 1 { pr } else { 1.0 - pr };
        }
        if p_outcome == 0.0 {
            continue;
        }
        // Pool the slots captured under this outcome.
        let mut slots: BTreeSet<usize> = BTreeSet::new();
        for (bit, &node) in involved.iter().enumerate() {
            if outcome >> bit & 1 == 0 {
                continue;
            }
            for pi in 0..paths.len() {
                if hears_path(node, pi) {
                    slots.extend(0..m); // every frame crosses every hop
                }
            }
        }
        let anchor = slots.contains(&0);
        let ring: BTreeSet<usize> =
            slots.iter().filter(|&&s| s > 0).map(|&s| s - 1).collect();
        let oracle_ok =
            recoverable_slots(anchor, &ring, plan.n as usize).len() >= plan.k as usize;
        let success = match attacker {
            AttackerModel::Oracle => oracle_ok,
            // Without permutation or bodies, a unique assignment only
            // exists in the degenerate single-frame layout.
            AttackerModel::Blind => oracle_ok && m == 1,
        };
        if success {
            total += p_outcome;
        }
    }
    Ok(total)
}
