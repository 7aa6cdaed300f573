//! Wire codec: turns a set of shares into an ordered, shuffled stream of
//! opaque frames, and inverts the transform under frame loss.
//!
//! Encoding pipeline for n shares:
//! 1. serialize share j as `x || payload` and XOR-encrypt it with a
//!    keystream derived from (key, nonce = j), giving e_j;
//! 2. ring-combine: one anchor frame carries e_0, ring frame i carries
//!    e_i ^ e_{(i+1) mod n} (no ring frames when n = 1);
//! 3. shuffle: logical slot j (anchor = slot 0, ring i = slot i + 1) is
//!    placed at wire position pi(j) under a keyed permutation.
//!
//! Frame headers expose only the session id and the wire position, so a
//! listener without the key cannot tell the anchor from a ring frame or
//! recover the ring order.
//!
//! The keystream is NOT a cryptographic cipher. It is a documented
//! deterministic PRG (xorshift64* seeded through splitmix64) standing in
//! for whatever real cipher a deployment would use; see [`derive_keystream`]
//! for the bit-exact definition.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use thiserror::Error;

use crate::sharing::{self, Share, ShareSet, SharingError};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("malformed input: {0}")]
    MalformedInput(String),
    #[error("insufficient shares: anchor missing or fewer than k shares recoverable")]
    InsufficientShares,
    #[error("session id mismatch across frames")]
    SessionMismatch,
    #[error(transparent)]
    Sharing(#[from] SharingError),
    #[error("container error: {0}")]
    Container(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pre-shared session secret: a 16-byte key plus a session identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionKey {
    pub key: [u8; 16],
    pub session_id: u32,
}

/// One wire frame. `body` length is identical for every frame of a
/// session and the header carries no frame-kind information.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub session_id: u32,
    pub wire_pos: u16,
    pub body: Vec<u8>,
}

impl Frame {
    /// Wire layout: session_id (4 bytes BE) || wire_pos (2 bytes BE) || body.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(6 + self.body.len());
        out.extend_from_slice(&self.session_id.to_be_bytes());
        out.extend_from_slice(&self.wire_pos.to_be_bytes());
        out.extend_from_slice(&self.body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Frame, CodecError> {
        if bytes.len() < 6 {
            return Err(CodecError::MalformedInput(format!(
                "frame too short: {} bytes",
                bytes.len()
            )));
        }
        Ok(Frame {
            session_id: u32::from_be_bytes(bytes[0..4].try_into().unwrap()),
            wire_pos: u16::from_be_bytes(bytes[4..6].try_into().unwrap()),
            body: bytes[6..].to_vec(),
        })
    }

    /// Total number of wire bytes this frame occupies.
    pub fn wire_len(&self) -> usize {
        6 + self.body.len()
    }
}

const SPLITMIX_GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 scramble of one input word.
pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(SPLITMIX_GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed mixing, bit-exact: starting from s = 0, fold in the two key
/// halves (big-endian u64s), the session id, then the nonce, each as
/// s = splitmix64(s ^ v). A zero result is replaced by the splitmix
/// constant so the xorshift state is never zero.
fn mix_seed(key: &SessionKey, nonce: u64) -> u64 {
    let lo = u64::from_be_bytes(key.key[0..8].try_into().unwrap());
    let hi = u64::from_be_bytes(key.key[8..16].try_into().unwrap());
    let mut s = 0u64;
    for v in [lo, hi, key.session_id as u64, nonce] {
        s = splitmix64(s ^ v);
    }
    if s == 0 {
        s = SPLITMIX_GOLDEN;
    }
    s
}

/// xorshift64* generator; state is always nonzero.
struct Xorshift64Star {
    state: u64,
}

impl Xorshift64Star {
    fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }
}

/// Deterministic keystream for (key, nonce): xorshift64* seeded by
/// [`mix_seed`], each output word emitted as 8 big-endian bytes.
pub fn derive_keystream(key: &SessionKey, nonce: u64, length: usize) -> Vec<u8> {
    let mut gen = Xorshift64Star { state: mix_seed(key, nonce) };
    let mut out = Vec::with_capacity(length + 8);
    while out.len() < length {
        out.extend_from_slice(&gen.next_u64().to_be_bytes());
    }
    out.truncate(length);
    out
}

/// XOR `data` with the (key, nonce) keystream. Involutive.
pub fn xor_transform(data: &[u8], key: &SessionKey, nonce: u64) -> Vec<u8> {
    let ks = derive_keystream(key, nonce, data.len());
    data.iter().zip(ks).map(|(d, k)| d ^ k).collect()
}

/// Ring-combine encrypted share bodies, ordered by logical index.
///
/// Returns the anchor body (e_0) and the ring bodies
/// f_i = e_i ^ e_{(i+1) mod n}. For n = 1 the ring list is empty.
pub fn ring_combine(encrypted: &[Vec<u8>]) -> Result<(Vec<u8>, Vec<Vec<u8>>), CodecError> {
    let n = encrypted.len();
    if n == 0 {
        return Err(CodecError::MalformedInput("ring_combine of zero shares".into()));
    }
    let len = encrypted[0].len();
    if encrypted.iter().any(|e| e.len() != len) {
        return Err(CodecError::MalformedInput("unequal encrypted share lengths".into()));
    }
    let anchor = encrypted[0].clone();
    if n == 1 {
        return Ok((anchor, Vec::new()));
    }
    let ring = (0..n)
        .map(|i| {
            let a = &encrypted[i];
            let b = &encrypted[(i + 1) % n];
            a.iter().zip(b).map(|(x, y)| x ^ y).collect()
        })
        .collect();
    Ok((anchor, ring))
}

/// Which logical share indices are derivable from the given presence set.
///
/// e_0 seeds the walk when the anchor is present; ring frame f_i lets a
/// known e_i produce e_{i+1} (clockwise) and a known e_{i+1} produce e_i
/// (counterclockwise).
pub fn recoverable_slots(anchor_present: bool, ring_present: &BTreeSet<usize>, n: usize) -> BTreeSet<usize> {
    let mut known = BTreeSet::new();
    if !anchor_present || n == 0 {
        return known;
    }
    known.insert(0);
    let mut frontier = vec![0usize];
    while let Some(i) = frontier.pop() {
        if n > 1 {
            let cw = (i + 1) % n;
            if ring_present.contains(&i) && known.insert(cw) {
                frontier.push(cw);
            }
            let ccw = (i + n - 1) % n;
            if ring_present.contains(&ccw) && known.insert(ccw) {
                frontier.push(ccw);
            }
        }
    }
    known
}

/// Recover every encrypted share body reachable from the anchor.
///
/// Partial recovery is a normal outcome: an absent anchor yields an
/// empty map, and missing ring frames truncate the walk.
pub fn recover_shares(
    anchor: Option<&[u8]>,
    ring: &BTreeMap<usize, Vec<u8>>,
    n: usize,
) -> BTreeMap<usize, Vec<u8>> {
    let mut known: BTreeMap<usize, Vec<u8>> = BTreeMap::new();
    let Some(anchor) = anchor else { return known };
    if n == 0 {
        return known;
    }
    known.insert(0, anchor.to_vec());
    let mut frontier = vec![0usize];
    while let Some(i) = frontier.pop() {
        if n == 1 {
            break;
        }
        let cw = (i + 1) % n;
        if !known.contains_key(&cw) {
            if let Some(f) = ring.get(&i) {
                let body: Vec<u8> = known[&i].iter().zip(f).map(|(a, b)| a ^ b).collect();
                known.insert(cw, body);
                frontier.push(cw);
            }
        }
        let ccw = (i + n - 1) % n;
        if !known.contains_key(&ccw) {
            if let Some(f) = ring.get(&ccw) {
                let body: Vec<u8> = known[&i].iter().zip(f).map(|(a, b)| a ^ b).collect();
                known.insert(ccw, body);
                frontier.push(ccw);
            }
        }
    }
    known
}

/// Keyed permutation between logical slots and wire positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    slot_to_wire: Vec<u16>,
    wire_to_slot: Vec<u16>,
}

impl Permutation {
    pub fn len(&self) -> usize {
        self.slot_to_wire.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slot_to_wire.is_empty()
    }

    pub fn slot_to_wire(&self, slot: usize) -> u16 {
        self.slot_to_wire[slot]
    }

    pub fn wire_to_slot(&self, wire_pos: u16) -> Option<usize> {
        self.wire_to_slot.get(wire_pos as usize).map(|&s| s as usize)
    }
}

/// Derive the keyed shuffle over `m` logical slots.
///
/// Fisher-Yates driven by the (key, nonce = m) generator, drawing u64
/// words (the keystream taken 8 big-endian bytes at a time) with
/// rejection sampling for unbiased indices. Deterministic per (key, m).
pub fn derive_permutation(key: &SessionKey, m: usize) -> Permutation {
    assert!(m >= 1 && m <= u16::MAX as usize + 1, "permutation size out of range");
    let mut gen = Xorshift64Star { state: mix_seed(key, m as u64) };
    let mut wire_to_slot: Vec<u16> = (0..m as u32).map(|i| i as u16).collect();
    for i in (1..m).rev() {
        let bound = (i + 1) as u64;
        let zone = (u64::MAX / bound) * bound;
        let j = loop {
            let x = gen.next_u64();
            if x < zone {
                break (x % bound) as usize;
            }
        };
        wire_to_slot.swap(i, j);
    }
    let mut slot_to_wire = vec![0u16; m];
    for (wire, &slot) in wire_to_slot.iter().enumerate() {
        slot_to_wire[slot as usize] = wire as u16;
    }
    Permutation { slot_to_wire, wire_to_slot }
}

/// Number of wire frames for n shares: anchor plus n ring frames,
/// except n = 1 which is anchor-only.
pub fn frame_count(n: usize) -> usize {
    if n == 1 {
        1
    } else {
        n + 1
    }
}

/// Encode a share set into its shuffled wire frames, sorted by wire position.
pub fn encode_frames(shares: &ShareSet, key: &SessionKey) -> Result<Vec<Frame>, CodecError> {
    let n = shares.n as usize;
    if shares.shares.len() != n || n == 0 {
        return Err(CodecError::MalformedInput(format!(
            "share set holds {} shares, expected n = {n}",
            shares.shares.len()
        )));
    }
    let encrypted: Vec<Vec<u8>> = shares
        .shares
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let mut plain = Vec::with_capacity(1 + s.payload.len());
            plain.push(s.x);
            plain.extend_from_slice(&s.payload);
            xor_transform(&plain, key, j as u64)
        })
        .collect();

    let (anchor, ring) = ring_combine(&encrypted)?;
    let m = frame_count(n);
    let perm = derive_permutation(key, m);

    let mut frames: Vec<Frame> = Vec::with_capacity(m);
    let mut push = |slot: usize, body: Vec<u8>| {
        frames.push(Frame {
            session_id: key.session_id,
            wire_pos: perm.slot_to_wire(slot),
            body,
        });
    };
    push(0, anchor);
    for (i, body) in ring.into_iter().enumerate() {
        push(i + 1, body);
    }
    frames.sort_by_key(|f| f.wire_pos);
    Ok(frames)
}

/// Decode whatever subset of a session's frames arrived.
///
/// Duplicate wire positions are ignored (first occurrence wins) and
/// arrival order is irrelevant: only the presence set matters.
pub fn decode_frames(
    frames: &[Frame],
    key: &SessionKey,
    n: u8,
    k: u8,
) -> Result<Vec<u8>, CodecError> {
    let n = n as usize;
    if n == 0 {
        return Err(CodecError::MalformedInput("n must be >= 1".into()));
    }
    let m = frame_count(n);
    let perm = derive_permutation(key, m);

    let mut anchor: Option<&[u8]> = None;
    let mut ring: BTreeMap<usize, Vec<u8>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for f in frames {
        if f.session_id != key.session_id {
            return Err(CodecError::SessionMismatch);
        }
        let Some(slot) = perm.wire_to_slot(f.wire_pos) else {
            return Err(CodecError::MalformedInput(format!(
                "wire position {} out of range for n = {n}",
                f.wire_pos
            )));
        };
        if !seen.insert(f.wire_pos) {
            continue;
        }
        if slot == 0 {
            anchor = Some(&f.body);
        } else {
            ring.insert(slot - 1, f.body.clone());
        }
    }

    let recovered = recover_shares(anchor, &ring, n);
    if recovered.len() < k as usize {
        return Err(CodecError::InsufficientShares);
    }

    let mut shares: Vec<Share> = Vec::with_capacity(recovered.len());
    for (j, body) in recovered {
        let plain = xor_transform(&body, key, j as u64);
        if plain.len() < 2 {
            return Err(CodecError::MalformedInput("share body too short".into()));
        }
        shares.push(Share { x: plain[0], payload: plain[1..].to_vec() });
    }
    Ok(sharing::reconstruct(&shares, k)?)
}

const CONTAINER_MAGIC: &[u8; 5] = b"SDUP1";

/// Write the offline container: magic "SDUP1", n, k, then each frame
/// length-prefixed with a 4-byte big-endian length.
pub fn write_container(
    w: &mut impl Write,
    n: u8,
    k: u8,
    frames: &[Frame],
) -> Result<(), CodecError> {
    w.write_all(CONTAINER_MAGIC)?;
    w.write_all(&[n, k])?;
    for f in frames {
        let bytes = f.to_bytes();
        w.write_all(&(bytes.len() as u32).to_be_bytes())?;
        w.write_all(&bytes)?;
    }
    Ok(())
}

/// Read an offline container back: returns (n, k, frames).
pub fn read_container(r: &mut impl Read) -> Result<(u8, u8, Vec<Frame>), CodecError> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != CONTAINER_MAGIC {
        return Err(CodecError::Container("bad magic, not an SDUP1 container".into()));
    }
    let mut nk = [0u8; 2];
    r.read_exact(&mut nk)?;
    let mut frames = Vec::new();
    loop {
        let mut len_buf = [0u8; 4];
        match r.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let len = u32::from_be_bytes(len_buf) as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        frames.push(Frame::from_bytes(&buf)?);
    }
    Ok((nk[0], nk[1], frames))
}
