//! SDUP: a share-splitting confidentiality protocol for ad hoc networks,
//! plus the deterministic discrete-event simulator used to evaluate it.
//!
//! The pipeline: a message is split into Shamir shares over GF(256)
//! ([`sharing`]), the shares are encrypted, pairwise ring-combined and
//! shuffled into opaque wire frames ([`codec`]), routed over the most
//! secure of the available node-disjoint paths ([`route`]), and pushed
//! hop by hop through a carrier-sensing radio medium ([`sim`], [`session`]).
//! [`adversary`] measures how often an eavesdropper positioned at
//! compromised relays can structurally reconstruct the message, and
//! [`harness`] runs seeded multi-trial experiments and emits CSV.

pub mod adversary;
pub mod codec;
pub mod gf256;
pub mod harness;
pub mod route;
pub mod session;
pub mod sharing;
pub mod sim;
