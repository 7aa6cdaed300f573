//! End-to-end message sessions: binds sharing, the frame codec, routing
//! and the simulator into sender/receiver state machines.
//!
//! The sender splits and encodes the message once, then queues the
//! identical wire-ordered frame stream on the primary path and on each
//! duplicate path. Frames are relayed hop by hop, every hop gated by the
//! medium's carrier sense. There is no ACK or retransmission layer:
//! reliability comes from share redundancy (n > k) and duplicate paths.
//! Relays forward frame bodies unchanged.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::RngCore;
use thiserror::Error;

use crate::codec::{self, CodecError, Frame, SessionKey};
use crate::route::Path;
use crate::sharing::{self, SharingError};
use crate::sim::{Notification, SimError, Simulator};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sharing(#[from] SharingError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Everything sender and receiver agreed on out of band.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub key: SessionKey,
    pub k: u8,
    pub n: u8,
    pub primary: Path,
    pub duplicates: Vec<Path>,
    /// None derives 2 * hop_count * frame_airtime * (n + 1) at run time.
    pub receiver_timeout: Option<f64>,
}

impl SessionConfig {
    fn validate(&self) -> Result<(), SessionError> {
        if self.k == 0 || self.n < self.k {
            return Err(SessionError::InvalidConfig(format!(
                "bad thresholds k={} n={}",
                self.k, self.n
            )));
        }
        let src = self.primary.source();
        let dst = self.primary.destination();
        for p in self.duplicates.iter() {
            if p.source() != src || p.destination() != dst {
                return Err(SessionError::InvalidConfig(
                    "duplicate path endpoints differ from primary".into(),
                ));
            }
        }
        Ok(())
    }

    fn all_paths(&self) -> Vec<&Path> {
        std::iter::once(&self.primary).chain(self.duplicates.iter()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverPhase {
    Collecting,
    Decoded,
    TimedOut,
}

/// Destination-side frame collection. Duplicate wire positions are
/// idempotent: the first arrival wins.
#[derive(Debug)]
pub struct ReceiverState {
    pub phase: ReceiverPhase,
    pub frames: BTreeMap<u16, Frame>,
    pub deadline: f64,
}

impl ReceiverState {
    pub fn new(deadline: f64) -> Self {
        ReceiverState { phase: ReceiverPhase::Collecting, frames: BTreeMap::new(), deadline }
    }

    pub fn accept(&mut self, frame: Frame) {
        self.frames.entry(frame.wire_pos).or_insert(frame);
    }
}

/// Try to decode what the receiver holds; Decoded on success, otherwise
/// the state stays Collecting (the deadline is enforced by the caller).
pub fn receiver_decode_attempt(
    state: &mut ReceiverState,
    session: &SessionConfig,
) -> Option<Vec<u8>> {
    if state.phase != ReceiverPhase::Collecting {
        return None;
    }
    let held: Vec<Frame> = state.frames.values().cloned().collect();
    match codec::decode_frames(&held, &session.key, session.n, session.k) {
        Ok(msg) => {
            state.phase = ReceiverPhase::Decoded;
            Some(msg)
        }
        Err(_) => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    /// Deadline passed (or all frames were lost) before k shares arrived.
    InsufficientShares,
}

/// Result of one session run, with per-medium counters scoped to it.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub delivered: Option<Vec<u8>>,
    pub failure: Option<FailureReason>,
    pub phase: ReceiverPhase,
    pub frames_sent: u64,
    pub collisions: u64,
    pub backoff_exhausted: u64,
    pub link_drops: u64,
    /// Wire bytes queued at the source across all paths.
    pub wire_bytes_queued: u64,
}

/// Split, encode and duplicate the message into per-path frame queues
/// (primary first), each in wire order.
pub fn sender_encode(
    message: &[u8],
    session: &SessionConfig,
    rng: &mut impl RngCore,
) -> Result<Vec<VecDeque<Frame>>, SessionError> {
    session.validate()?;
    let shares = sharing::split(message, session.k, session.n, rng)?;
    let frames = codec::encode_frames(&shares, &session.key)?;
    let copies = 1 + session.duplicates.len();
    Ok((0..copies).map(|_| frames.iter().cloned().collect()).collect())
}

/// Drive one message through the simulator along the session's paths.
///
/// The source serializes its own transmissions: the next frame (round-
/// robin across paths) is injected when the previous source transmission
/// concludes. Relays forward on delivery. A hop broken by mobility drops
/// the frame; it is counted, never re-routed.
pub fn run_session(
    sim: &mut Simulator,
    session: &SessionConfig,
    message: &[u8],
    rng: &mut impl RngCore,
) -> Result<SessionOutcome, SessionError> {
    session.validate()?;
    if message.is_empty() {
        return Err(SessionError::InvalidConfig("empty message".into()));
    }
    let queues = sender_encode(message, session, rng)?;
    let wire_bytes_queued: u64 =
        queues.iter().flatten().map(|f| f.wire_len() as u64).sum();

    let paths = session.all_paths();
    let src = session.primary.source();
    let dst = session.primary.destination();

    // Each relay appears on exactly one path (node-disjointness), so a
    // delivery at a relay identifies the next hop uniquely.
    let mut next_hop: HashMap<u32, u32> = HashMap::new();
    for p in &paths {
        for w in p.0.windows(2) {
            if w[0] != src {
                next_hop.insert(w[0], w[1]);
            }
        }
    }

    // Round-robin source order: frame 0 on every path, then frame 1, ...
    let mut source_queue: VecDeque<(usize, Frame)> = VecDeque::new();
    let m = queues[0].len();
    for i in 0..m {
        for (path_idx, q) in queues.iter().enumerate() {
            source_queue.push_back((path_idx, q[i].clone()));
        }
    }

    let start_counters = sim.counters;
    let start_time = sim.now();
    let timeout = session.receiver_timeout.unwrap_or_else(|| {
        let hops = paths.iter().map(|p| p.hops()).max().unwrap_or(1);
        2.0 * hops as f64 * sim.channel.frame_airtime * (session.n as f64 + 1.0)
    });
    let mut receiver = ReceiverState::new(start_time + timeout);

    let mut inject_next = |sim: &mut Simulator, at: f64| {
        while let Some((path_idx, frame)) = source_queue.pop_front() {
            let first_hop = paths[path_idx].0[1];
            match sim.submit_frame(frame, src, first_hop, at) {
                Ok(_) => return,
                Err(SimError::NotLinked(..)) => continue, // counted below as never sent
                Err(_) => continue,
            }
        }
    };
    inject_next(sim, start_time);

    let mut delivered_msg: Option<Vec<u8>> = None;
    while let Some(note) = sim.pump() {
        let (time, sender) = match note {
            Notification::TxOutcome { time, sender, .. } => (time, sender),
            Notification::Dropped { time, sender, .. } => (time, sender),
        };
        if sender == src {
            inject_next(sim, time);
        }
        if let Notification::TxOutcome { delivered: true, receiver: node, frame_idx, .. } = note
        {
            if node == dst {
                receiver.accept(sim.frame(frame_idx).clone());
                if receiver.frames.len() >= session.k as usize {
                    if let Some(msg) = receiver_decode_attempt(&mut receiver, session) {
                        delivered_msg = Some(msg);
                        break;
                    }
                }
            } else if let Some(&hop) = next_hop.get(&node) {
                // Forward; a vanished link is a counted drop inside the sim
                // on the next attempt, an already-broken one is dropped here.
                let _ = sim.forward_frame(frame_idx, node, hop, time);
            }
        }
        if time >= receiver.deadline {
            break;
        }
    }

    if delivered_msg.is_none() {
        delivered_msg = receiver_decode_attempt(&mut receiver, session);
    }
    if delivered_msg.is_none() {
        receiver.phase = ReceiverPhase::TimedOut;
    }

    let c = sim.counters;
    Ok(SessionOutcome {
        failure: if delivered_msg.is_some() {
            None
        } else {
            Some(FailureReason::InsufficientShares)
        },
        phase: receiver.phase,
        delivered: delivered_msg,
        frames_sent: c.frames_sent - start_counters.frames_sent,
        collisions: c.collisions - start_counters.collisions,
        backoff_exhausted: c.backoff_exhausted - start_counters.backoff_exhausted,
        link_drops: c.link_drops - start_counters.link_drops,
        wire_bytes_queued,
    })
}
