//! Security-aware route selection over a topology snapshot.
//!
//! Disjoint-path discovery is greedy shortest-first: BFS finds the
//! shortest path (lexicographically smallest node sequence on ties),
//! its intermediates are removed, and the search repeats. The security
//! cost of a path is the probability that at least one intermediate
//! relay is compromised; transmission uses the cheapest path. A
//! redundancy plan (extra shares, duplicate path) is triggered by high
//! average mobility when enough disjoint paths exist.

use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::sim::Topology;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RouteError {
    #[error("no path from {0} to {1}")]
    Unreachable(u32, u32),
    #[error("invalid routing parameters: {0}")]
    InvalidParams(String),
}

/// A loop-free node sequence from source to destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path(pub Vec<u32>);

impl Path {
    pub fn source(&self) -> u32 {
        *self.0.first().expect("path is nonempty")
    }

    pub fn destination(&self) -> u32 {
        *self.0.last().expect("path is nonempty")
    }

    /// Relay nodes between the endpoints.
    pub fn intermediates(&self) -> &[u32] {
        &self.0[1..self.0.len() - 1]
    }

    pub fn hops(&self) -> usize {
        self.0.len() - 1
    }
}

/// Paths sharing endpoints, pairwise node-disjoint on intermediates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

/// How many shares to make and whether a second path carries a copy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RedundancyPlan {
    pub k: u8,
    pub n: u8,
    pub duplicate_paths: usize,
}

/// Knobs for [`redundancy_decision`], all artifact configuration.
#[derive(Debug, Clone, Copy)]
pub struct RedundancyConfig {
    pub base_k: u8,
    pub extra_shares: u8,
    pub mobility_threshold: f64,
}

impl Default for RedundancyConfig {
    fn default() -> Self {
        RedundancyConfig { base_k: 3, extra_shares: 1, mobility_threshold: 1.0 }
    }
}

/// Shortest path src -> dst avoiding `banned`, lexicographically
/// smallest node sequence among equals. BFS from dst gives distances;
/// a greedy walk from src picks the smallest-id neighbor that still
/// shrinks the distance.
fn shortest_path(
    topo: &Topology,
    src: u32,
    dst: u32,
    banned: &BTreeSet<u32>,
    skip_direct: bool,
) -> Option<Vec<u32>> {
    let usable = |id: u32| id == src || id == dst || !banned.contains(&id);
    // The direct edge, once taken, cannot be removed as an intermediate;
    // skip it so later rounds find multi-hop alternatives.
    let edge_ok = |a: u32, b: u32| !(skip_direct && a.min(b) == src.min(dst) && a.max(b) == src.max(dst));
    let mut dist: std::collections::BTreeMap<u32, usize> = [(dst, 0)].into();
    let mut queue = VecDeque::from([dst]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        for w in topo.neighbors(v) {
            if usable(w) && edge_ok(v, w) && !dist.contains_key(&w) {
                dist.insert(w, d + 1);
                queue.push_back(w);
            }
        }
    }
    let mut cur = src;
    let mut d = *dist.get(&src)?;
    let mut path = vec![src];
    while cur != dst {
        let next = topo
            .neighbors(cur)
            .into_iter()
            .find(|w| usable(*w) && edge_ok(cur, *w) && dist.get(w) == Some(&(d - 1)))?;
        path.push(next);
        cur = next;
        d -= 1;
    }
    Some(path)
}

/// Greedy shortest-first node-disjoint path discovery.
pub fn discover_disjoint_paths(
    topo: &Topology,
    src: u32,
    dst: u32,
    max_paths: usize,
) -> Result<PathSet, RouteError> {
    if src == dst {
        return Err(RouteError::InvalidParams("source equals destination".into()));
    }
    if topo.index_of(src).is_err() || topo.index_of(dst).is_err() {
        return Err(RouteError::InvalidParams("endpoint not in topology".into()));
    }
    let mut banned = BTreeSet::new();
    let mut paths = Vec::new();
    let mut direct_found = false;
    while paths.len() < max_paths {
        let Some(p) = shortest_path(topo, src, dst, &banned, direct_found) else { break };
        direct_found |= p.len() == 2;
        banned.extend(p[1..p.len() - 1].iter().copied());
        paths.push(Path(p));
    }
    if paths.is_empty() {
        return Err(RouteError::Unreachable(src, dst));
    }
    Ok(PathSet { paths })
}

/// Probability that at least one intermediate relay is compromised.
pub fn path_security_cost(path: &Path, topo: &Topology) -> f64 {
    let mut safe = 1.0;
    for &id in path.intermediates() {
        if let Ok(node) = topo.node(id) {
            safe *= 1.0 - node.compromise_prob;
        }
    }
    1.0 - safe
}

/// The path minimizing security cost; ties broken by fewer hops, then
/// lexicographically smallest node sequence.
pub fn select_path<'a>(set: &'a PathSet, topo: &Topology) -> Result<&'a Path, RouteError> {
    set.paths
        .iter()
        .min_by(|a, b| {
            path_security_cost(a, topo)
                .total_cmp(&path_security_cost(b, topo))
                .then(a.hops().cmp(&b.hops()))
                .then(a.0.cmp(&b.0))
        })
        .ok_or_else(|| RouteError::InvalidParams("empty path set".into()))
}

/// Redundancy is worthwhile only when the network moves fast enough to
/// lose frames and a second disjoint path exists to carry copies.
pub fn redundancy_decision(
    avg_mobility: f64,
    path_count: usize,
    config: &RedundancyConfig,
) -> Result<RedundancyPlan, RouteError> {
    if path_count == 0 {
        return Err(RouteError::InvalidParams("path_count must be >= 1".into()));
    }
    let k = config.base_k;
    if avg_mobility > config.mobility_threshold && path_count >= 2 {
        Ok(RedundancyPlan {
            k,
            n: k.saturating_add(config.extra_shares),
            duplicate_paths: 1.min(path_count - 1),
        })
    } else {
        Ok(RedundancyPlan { k, n: k, duplicate_paths: 0 })
    }
}
