//! Deterministic discrete-event simulation of an ad hoc radio network.
//!
//! Unit-disk propagation: node i hears node j iff their distance is at
//! most min(range_i, range_j). Carrier sensing uses the sensing node's
//! own range, so a transmitter outside it goes unnoticed even when both
//! reach a common receiver — the hidden-terminal case. Any two
//! transmissions that overlap in time and are both audible at a listener
//! destroy each other there.
//!
//! Per-hop channel loss is a pure function of
//! (seed, sender, listener, session_id, wire_pos), not of draw order, so
//! adding traffic elsewhere never flips an unrelated loss outcome. The
//! event-queue RNG is used only for backoff slots and mobility waypoints.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::codec::Frame;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown node id {0}")]
    UnknownNode(u32),
    #[error("nodes {0} and {1} are not linked")]
    NotLinked(u32, u32),
}

/// A mobile radio node.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub id: u32,
    pub pos: (f64, f64),
    pub speed: f64,
    pub heading: f64,
    pub radio_range: f64,
    pub compromise_prob: f64,
    pub compromised: bool,
    /// Current random-waypoint target; None means "travel along heading".
    pub waypoint: Option<(f64, f64)>,
}

impl NodeState {
    pub fn new(id: u32, pos: (f64, f64), speed: f64, range: f64, compromise_prob: f64) -> Self {
        NodeState {
            id,
            pos,
            speed,
            heading: 0.0,
            radio_range: range,
            compromise_prob,
            compromised: false,
            waypoint: None,
        }
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Symmetric adjacency derived from pairwise distance and radio ranges.
pub fn build_links(nodes: &[NodeState]) -> Result<Vec<Vec<bool>>, SimError> {
    let mut seen = BTreeMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if n.radio_range <= 0.0 {
            return Err(SimError::Config(format!("node {} has nonpositive range", n.id)));
        }
        if !(0.0..=1.0).contains(&n.compromise_prob) {
            return Err(SimError::Config(format!(
                "node {} compromise_prob out of [0,1]",
                n.id
            )));
        }
        if seen.insert(n.id, i).is_some() {
            return Err(SimError::Config(format!("duplicate node id {}", n.id)));
        }
    }
    let mut adj = vec![vec![false; nodes.len()]; nodes.len()];
    for i in 0..nodes.len() {
        for j in (i + 1)..nodes.len() {
            let reach = nodes[i].radio_range.min(nodes[j].radio_range);
            if dist(nodes[i].pos, nodes[j].pos) <= reach {
                adj[i][j] = true;
                adj[j][i] = true;
            }
        }
    }
    Ok(adj)
}

/// Node set plus derived link adjacency and arena bounds.
#[derive(Debug, Clone)]
pub struct Topology {
    pub nodes: Vec<NodeState>,
    pub arena: (f64, f64),
    adj: Vec<Vec<bool>>,
    index: BTreeMap<u32, usize>,
}

impl Topology {
    pub fn new(nodes: Vec<NodeState>, arena: (f64, f64)) -> Result<Self, SimError> {
        if arena.0 <= 0.0 || arena.1 <= 0.0 {
            return Err(SimError::Config("arena dimensions must be positive".into()));
        }
        let adj = build_links(&nodes)?;
        let index = nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        Ok(Topology { nodes, arena, adj, index })
    }

    pub fn rebuild_links(&mut self) {
        self.adj = build_links(&self.nodes).expect("node set validated at construction");
    }

    pub fn index_of(&self, id: u32) -> Result<usize, SimError> {
        self.index.get(&id).copied().ok_or(SimError::UnknownNode(id))
    }

    pub fn node(&self, id: u32) -> Result<&NodeState, SimError> {
        Ok(&self.nodes[self.index_of(id)?])
    }

    pub fn node_mut(&mut self, id: u32) -> Result<&mut NodeState, SimError> {
        let i = self.index_of(id)?;
        Ok(&mut self.nodes[i])
    }

    pub fn linked(&self, a: u32, b: u32) -> bool {
        match (self.index.get(&a), self.index.get(&b)) {
            (Some(&i), Some(&j)) => i != j && self.adj[i][j],
            _ => false,
        }
    }

    /// Neighbor ids in ascending order.
    pub fn neighbors(&self, id: u32) -> Vec<u32> {
        let Some(&i) = self.index.get(&id) else { return Vec::new() };
        self.nodes
            .iter()
            .enumerate()
            .filter(|(j, _)| self.adj[i][*j])
            .map(|(_, n)| n.id)
            .collect()
    }

    pub fn node_ids(&self) -> Vec<u32> {
        self.index.keys().copied().collect()
    }
}

/// Parse the line-oriented topology format:
/// `arena <width> <height>` and `node <id> <x> <y> <speed> <range> <compromise_prob>`,
/// decimal fields separated by single spaces, `#` starts a comment.
pub fn parse_topology(text: &str) -> Result<Topology, SimError> {
    let mut arena = (1000.0, 1000.0);
    let mut nodes = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(' ').collect();
        let bad = |msg: &str| SimError::Config(format!("line {}: {msg}", lineno + 1));
        match fields[0] {
            "arena" => {
                if fields.len() != 3 {
                    return Err(bad("arena expects 2 fields"));
                }
                arena = (
                    fields[1].parse().map_err(|_| bad("bad arena width"))?,
                    fields[2].parse().map_err(|_| bad("bad arena height"))?,
                );
            }
            "node" => {
                if fields.len() != 7 {
                    return Err(bad("node expects 6 fields"));
                }
                let id = fields[1].parse().map_err(|_| bad("bad node id"))?;
                let x: f64 = fields[2].parse().map_err(|_| bad("bad x"))?;
                let y: f64 = fields[3].parse().map_err(|_| bad("bad y"))?;
                let speed = fields[4].parse().map_err(|_| bad("bad speed"))?;
                let range = fields[5].parse().map_err(|_| bad("bad range"))?;
                let cprob: f64 = fields[6].parse().map_err(|_| bad("bad compromise_prob"))?;
                nodes.push(NodeState::new(id, (x, y), speed, range, cprob));
            }
            other => return Err(bad(&format!("unknown directive `{other}`"))),
        }
    }
    Topology::new(nodes, arena)
}

/// Random-waypoint motion for `dt` seconds, then link rebuild.
///
/// A node without a waypoint travels along its heading until it hits the
/// arena boundary, where it draws a waypoint; a node with a waypoint
/// heads straight for it and draws a fresh one upon arrival.
pub fn step_mobility(topo: &mut Topology, dt: f64, rng: &mut impl RngCore) {
    assert!(dt > 0.0, "dt must be positive");
    let arena = topo.arena;
    for node in &mut topo.nodes {
        if node.speed <= 0.0 {
            continue;
        }
        let mut remaining = node.speed * dt;
        let mut fuel = 64; // guards against degenerate zero-length hops
        while remaining > 1e-12 && fuel > 0 {
            fuel -= 1;
            match node.waypoint {
                Some(wp) => {
                    let d = dist(node.pos, wp);
                    if d <= remaining {
                        node.pos = wp;
                        remaining -= d;
                        let next = (rng.gen::<f64>() * arena.0, rng.gen::<f64>() * arena.1);
                        node.heading = (next.1 - node.pos.1).atan2(next.0 - node.pos.0);
                        node.waypoint = Some(next);
                    } else {
                        node.pos.0 += (wp.0 - node.pos.0) / d * remaining;
                        node.pos.1 += (wp.1 - node.pos.1) / d * remaining;
                        remaining = 0.0;
                    }
                }
                None => {
                    let (dx, dy) = (node.heading.cos(), node.heading.sin());
                    let tx = (node.pos.0 + dx * remaining).clamp(0.0, arena.0);
                    let ty = (node.pos.1 + dy * remaining).clamp(0.0, arena.1);
                    let travelled = dist(node.pos, (tx, ty));
                    node.pos = (tx, ty);
                    if travelled + 1e-12 < remaining {
                        // Hit the boundary; switch to waypoint mode.
                        let next = (rng.gen::<f64>() * arena.0, rng.gen::<f64>() * arena.1);
                        node.heading = (next.1 - node.pos.1).atan2(next.0 - node.pos.0);
                        node.waypoint = Some(next);
                    }
                    remaining -= travelled.max(1e-12);
                }
            }
        }
    }
    topo.rebuild_links();
}

/// Arithmetic mean of node speeds.
pub fn average_mobility(topo: &Topology) -> Result<f64, SimError> {
    if topo.nodes.is_empty() {
        return Err(SimError::Config("average_mobility of empty topology".into()));
    }
    Ok(topo.nodes.iter().map(|n| n.speed).sum::<f64>() / topo.nodes.len() as f64)
}

/// Shared-medium parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub frame_airtime: f64,
    pub loss_prob: f64,
    pub backoff_slot: f64,
    pub max_backoffs: u32,
    /// Contention window: a deferral waits a uniform 1..=backoff_window slots.
    pub backoff_window: u32,
    pub carrier_sense: bool,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            frame_airtime: 0.001,
            loss_prob: 0.0,
            backoff_slot: 0.0001,
            max_backoffs: 16,
            backoff_window: 8,
            carrier_sense: true,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.frame_airtime <= 0.0 {
            return Err(SimError::Config("frame_airtime must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(SimError::Config("loss_prob out of [0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    LinkBroken,
    BackoffExhausted,
    Collision,
    ChannelLoss,
}

/// What the simulator reports back to the protocol driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Notification {
    /// A transmission went on air and concluded.
    TxOutcome {
        time: f64,
        sender: u32,
        receiver: u32,
        frame_idx: usize,
        delivered: bool,
        reason: Option<DropReason>,
    },
    /// A frame never made it on air.
    Dropped { time: f64, sender: u32, receiver: u32, frame_idx: usize, reason: DropReason },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    TransmitStart { time: f64, sender: u32, receiver: u32, frame_idx: usize },
    Delivered { time: f64, sender: u32, receiver: u32, frame_idx: usize },
    Overheard { time: f64, node: u32, sender: u32, frame_idx: usize },
    Collision { time: f64, receiver: u32, frame_idx: usize },
    ChannelLoss { time: f64, receiver: u32, frame_idx: usize },
    BackoffExhausted { time: f64, sender: u32, frame_idx: usize },
    LinkBroken { time: f64, sender: u32, receiver: u32, frame_idx: usize },
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Counters {
    pub frames_sent: u64,
    pub delivered: u64,
    pub collisions: u64,
    pub channel_losses: u64,
    pub backoff_exhausted: u64,
    pub link_drops: u64,
}

#[derive(Debug, Clone, Copy)]
struct TxRecord {
    sender: u32,
    receiver: u32,
    start: f64,
    end: f64,
    frame_idx: usize,
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    MobilityTick,
    TransmitEnd { tx_idx: usize },
    TransmitAttempt { frame_idx: usize, sender: u32, receiver: u32, attempts: u32 },
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::MobilityTick => 0,
            EventKind::TransmitEnd { .. } => 1,
            EventKind::TransmitAttempt { .. } => 2,
        }
    }

    fn sender(&self) -> u32 {
        match self {
            EventKind::MobilityTick => 0,
            EventKind::TransmitEnd { .. } => 0, // resolved via tx record at pop time
            EventKind::TransmitAttempt { sender, .. } => *sender,
        }
    }
}

struct QueuedEvent {
    time: f64,
    kind: EventKind,
    sender: u32,
    seq: u64,
}

impl PartialEq for QueuedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueuedEvent {}
impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.rank().cmp(&other.kind.rank()))
            .then(self.sender.cmp(&other.sender))
            .then(self.seq.cmp(&other.seq))
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One simulation instance: a sequential event loop over a shared medium.
pub struct Simulator {
    pub topology: Topology,
    pub channel: ChannelParams,
    time: f64,
    queue: BinaryHeap<std::cmp::Reverse<QueuedEvent>>,
    seq: u64,
    pending_tx_events: usize,
    txs: Vec<TxRecord>,
    frames: Vec<Frame>,
    trace: Vec<TraceEvent>,
    rng: ChaCha12Rng,
    loss_salt: u64,
    mobility_interval: Option<f64>,
    pub counters: Counters,
}

impl Simulator {
    pub fn new(topology: Topology, channel: ChannelParams, seed: u64) -> Result<Self, SimError> {
        channel.validate()?;
        Ok(Simulator {
            topology,
            channel,
            time: 0.0,
            queue: BinaryHeap::new(),
            seq: 0,
            pending_tx_events: 0,
            txs: Vec::new(),
            frames: Vec::new(),
            trace: Vec::new(),
            rng: ChaCha12Rng::seed_from_u64(splitmix64(seed)),
            loss_salt: splitmix64(seed ^ 0x106C_0551),
            mobility_interval: None,
            counters: Counters::default(),
        })
    }

    /// Step node mobility every `interval` simulated seconds while
    /// transmissions are pending.
    pub fn enable_mobility(&mut self, interval: f64) {
        assert!(interval > 0.0);
        self.mobility_interval = Some(interval);
        let t = self.time + interval;
        self.push(t, EventKind::MobilityTick);
    }

    pub fn now(&self) -> f64 {
        self.time
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn frame(&self, idx: usize) -> &Frame {
        &self.frames[idx]
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        if !matches!(kind, EventKind::MobilityTick) {
            self.pending_tx_events += 1;
        }
        let sender = kind.sender();
        self.queue.push(std::cmp::Reverse(QueuedEvent { time, kind, sender, seq: self.seq }));
        self.seq += 1;
    }

    /// Register a frame and schedule its first transmission attempt.
    ///
    /// Errors if sender and receiver are not currently linked; mid-air
    /// link breakage later is a counted drop, not an error.
    pub fn submit_frame(
        &mut self,
        frame: Frame,
        sender: u32,
        receiver: u32,
        at: f64,
    ) -> Result<usize, SimError> {
        let idx = self.frames.len();
        self.frames.push(frame);
        self.forward_frame(idx, sender, receiver, at)?;
        Ok(idx)
    }

    /// Schedule another hop for an already-registered frame.
    pub fn forward_frame(
        &mut self,
        frame_idx: usize,
        sender: u32,
        receiver: u32,
        at: f64,
    ) -> Result<(), SimError> {
        self.topology.index_of(sender)?;
        self.topology.index_of(receiver)?;
        if !self.topology.linked(sender, receiver) {
            return Err(SimError::NotLinked(sender, receiver));
        }
        self.push(at.max(self.time), EventKind::TransmitAttempt {
            frame_idx,
            sender,
            receiver,
            attempts: 0,
        });
        Ok(())
    }

    /// True iff no in-progress transmission from any node within the
    /// sensing node's own radio range overlaps `time`.
    pub fn is_medium_idle(&self, node: u32, time: f64) -> bool {
        let Ok(sensing) = self.topology.node(node) else { return true };
        !self.txs.iter().any(|tx| {
            tx.start <= time
                && time < tx.end
                && self
                    .topology
                    .node(tx.sender)
                    .map(|s| dist(sensing.pos, s.pos) <= sensing.radio_range)
                    .unwrap_or(false)
        })
    }

    /// Pure per-hop loss draw; see module docs.
    fn loss_roll(&self, sender: u32, listener: u32, frame_idx: usize) -> f64 {
        let f = &self.frames[frame_idx];
        let mut h = self.loss_salt;
        for v in [sender as u64, listener as u64, f.session_id as u64, f.wire_pos as u64] {
            h = splitmix64(h ^ v);
        }
        (h >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Process events until the next protocol-visible notification, or
    /// until the queue is empty.
    pub fn pump(&mut self) -> Option<Notification> {
        while let Some(std::cmp::Reverse(ev)) = self.queue.pop() {
            self.time = self.time.max(ev.time);
            if !matches!(ev.kind, EventKind::MobilityTick) {
                self.pending_tx_events -= 1;
            }
            if let Some(n) = self.process(ev.time, ev.kind) {
                return Some(n);
            }
        }
        None
    }

    /// Drain every pending event.
    pub fn run_to_idle(&mut self) {
        while self.pump().is_some() {}
    }

    fn process(&mut self, time: f64, kind: EventKind) -> Option<Notification> {
        match kind {
            EventKind::MobilityTick => {
                let dt = self.mobility_interval.expect("tick without interval");
                let mut rng = self.rng.clone();
                step_mobility(&mut self.topology, dt, &mut rng);
                self.rng = rng;
                if self.pending_tx_events > 0 {
                    self.push(time + dt, EventKind::MobilityTick);
                }
                None
            }
            EventKind::TransmitAttempt { frame_idx, sender, receiver, attempts } => {
                if !self.topology.linked(sender, receiver) {
                    self.trace.push(TraceEvent::LinkBroken { time, sender, receiver, frame_idx });
                    self.counters.link_drops += 1;
                    return Some(Notification::Dropped {
                        time,
                        sender,
                        receiver,
                        frame_idx,
                        reason: DropReason::LinkBroken,
                    });
                }
                if self.channel.carrier_sense && !self.is_medium_idle(sender, time) {
                    if attempts >= self.channel.max_backoffs {
                        self.trace.push(TraceEvent::BackoffExhausted { time, sender, frame_idx });
                        self.counters.backoff_exhausted += 1;
                        return Some(Notification::Dropped {
                            time,
                            sender,
                            receiver,
                            frame_idx,
                            reason: DropReason::BackoffExhausted,
                        });
                    }
                    let slots = self.rng.gen_range(1..=self.channel.backoff_window.max(1));
                    let retry = time + slots as f64 * self.channel.backoff_slot;
                    self.push(retry, EventKind::TransmitAttempt {
                        frame_idx,
                        sender,
                        receiver,
                        attempts: attempts + 1,
                    });
                    return None;
                }
                let tx_idx = self.txs.len();
                self.txs.push(TxRecord {
                    sender,
                    receiver,
                    start: time,
                    end: time + self.channel.frame_airtime,
                    frame_idx,
                });
                self.trace.push(TraceEvent::TransmitStart { time, sender, receiver, frame_idx });
                self.counters.frames_sent += 1;
                self.push(time + self.channel.frame_airtime, EventKind::TransmitEnd { tx_idx });
                None
            }
            EventKind::TransmitEnd { tx_idx } => self.finish_transmission(time, tx_idx),
        }
    }

    fn finish_transmission(&mut self, time: f64, tx_idx: usize) -> Option<Notification> {
        let tx = self.txs[tx_idx];
        let mut outcome = None;

        if !self.topology.linked(tx.sender, tx.receiver) {
            self.trace.push(TraceEvent::LinkBroken {
                time,
                sender: tx.sender,
                receiver: tx.receiver,
                frame_idx: tx.frame_idx,
            });
            self.counters.link_drops += 1;
            return Some(Notification::TxOutcome {
                time,
                sender: tx.sender,
                receiver: tx.receiver,
                frame_idx: tx.frame_idx,
                delivered: false,
                reason: Some(DropReason::LinkBroken),
            });
        }

        for listener in self.topology.neighbors(tx.sender) {
            let jammed = self.interfered(&tx, tx_idx, listener);
            let lost = !jammed
                && self.loss_roll(tx.sender, listener, tx.frame_idx) < self.channel.loss_prob;
            if listener == tx.receiver {
                if jammed {
                    self.trace.push(TraceEvent::Collision {
                        time,
                        receiver: listener,
                        frame_idx: tx.frame_idx,
                    });
                    self.counters.collisions += 1;
                    outcome = Some((false, Some(DropReason::Collision)));
                } else if lost {
                    self.trace.push(TraceEvent::ChannelLoss {
                        time,
                        receiver: listener,
                        frame_idx: tx.frame_idx,
                    });
                    self.counters.channel_losses += 1;
                    outcome = Some((false, Some(DropReason::ChannelLoss)));
                } else {
                    self.trace.push(TraceEvent::Delivered {
                        time,
                        sender: tx.sender,
                        receiver: listener,
                        frame_idx: tx.frame_idx,
                    });
                    self.counters.delivered += 1;
                    outcome = Some((true, None));
                }
            } else if !jammed && !lost {
                self.trace.push(TraceEvent::Overheard {
                    time,
                    node: listener,
                    sender: tx.sender,
                    frame_idx: tx.frame_idx,
                });
            }
        }

        let (delivered, reason) = outcome.unwrap_or((false, Some(DropReason::LinkBroken)));
        Some(Notification::TxOutcome {
            time,
            sender: tx.sender,
            receiver: tx.receiver,
            frame_idx: tx.frame_idx,
            delivered,
            reason,
        })
    }

    /// Does any other audible transmission overlap `tx` at `listener`?
    fn interfered(&self, tx: &TxRecord, tx_idx: usize, listener: u32) -> bool {
        let lnode = self.topology.node(listener).expect("listener exists");
        self.txs.iter().enumerate().any(|(i, other)| {
            if i == tx_idx || other.start >= tx.end || other.end <= tx.start {
                return false;
            }
            if other.sender == listener {
                return true; // half-duplex: a transmitting node cannot receive
            }
            match self.topology.node(other.sender) {
                Ok(s) => dist(lnode.pos, s.pos) <= lnode.radio_range.min(s.radio_range),
                Err(_) => false,
            }
        })
    }
}
