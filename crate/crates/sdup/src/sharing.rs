//! Shamir (k, n) threshold sharing of byte strings over GF(256).
//!
//! Each message byte is shared independently: a random polynomial of
//! degree k-1 with the byte as constant term is sampled, and share j
//! carries the evaluations at x = j (x runs 1..=n). Any k shares
//! reconstruct the message by Lagrange interpolation at x = 0; any
//! k-1 shares are information-theoretically independent of it.

use rand::RngCore;
use thiserror::Error;

use crate::gf256::{gf_add, gf_inv, gf_mul};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SharingError {
    #[error("invalid sharing parameters: {0}")]
    InvalidParams(String),
    #[error("insufficient shares: have {have}, need {need}")]
    InsufficientShares { have: usize, need: usize },
    #[error("duplicate share x-coordinate {0}")]
    DuplicateShare(u8),
    #[error("malformed share: {0}")]
    MalformedShare(String),
}

/// One Shamir share: the evaluation point and one evaluation per message byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Share {
    pub x: u8,
    pub payload: Vec<u8>,
}

/// A full (k, n) sharing of a message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShareSet {
    pub k: u8,
    pub n: u8,
    pub shares: Vec<Share>,
}

/// Split `secret` into `n` shares with threshold `k`.
///
/// Evaluation points are x = 1..=n. Polynomial coefficients are drawn
/// from `rng` only, so a seeded generator makes the split reproducible.
pub fn split(
    secret: &[u8],
    k: u8,
    n: u8,
    rng: &mut impl RngCore,
) -> Result<ShareSet, SharingError> {
    if k == 0 {
        return Err(SharingError::InvalidParams("threshold k must be >= 1".into()));
    }
    if n < k {
        return Err(SharingError::InvalidParams(format!(
            "share count n={n} below threshold k={k}"
        )));
    }
    if secret.is_empty() {
        return Err(SharingError::InvalidParams("secret must be nonempty".into()));
    }

    let mut shares: Vec<Share> = (1..=n)
        .map(|x| Share { x, payload: Vec::with_capacity(secret.len()) })
        .collect();

    let mut coeffs = vec![0u8; k as usize];
    for &byte in secret {
        coeffs[0] = byte;
        for c in coeffs[1..].iter_mut() {
            let mut b = [0u8; 1];
            rng.fill_bytes(&mut b);
            *c = b[0];
        }
        for share in &mut shares {
            share.payload.push(eval_poly(&coeffs, share.x));
        }
    }

    Ok(ShareSet { k, n, shares })
}

/// Horner evaluation of `coeffs[0] + coeffs[1] x + ...` at `x`.
fn eval_poly(coeffs: &[u8], x: u8) -> u8 {
    let mut acc = 0u8;
    for &c in coeffs.iter().rev() {
        acc = gf_add(gf_mul(acc, x), c);
    }
    acc
}

/// Reconstruct the secret from at least `k` shares.
///
/// Exactly the first `k` shares are interpolated; all provided shares
/// are validated for distinct x and equal payload lengths first.
pub fn reconstruct(shares: &[Share], k: u8) -> Result<Vec<u8>, SharingError> {
    if shares.len() < k as usize {
        return Err(SharingError::InsufficientShares { have: shares.len(), need: k as usize });
    }
    let mut seen = [false; 256];
    for s in shares {
        if s.x == 0 {
            return Err(SharingError::MalformedShare("share with x = 0".into()));
        }
        if seen[s.x as usize] {
            return Err(SharingError::DuplicateShare(s.x));
        }
        seen[s.x as usize] = true;
        if s.payload.len() != shares[0].payload.len() {
            return Err(SharingError::MalformedShare(format!(
                "payload length mismatch: {} vs {}",
                s.payload.len(),
                shares[0].payload.len()
            )));
        }
    }

    let used = &shares[..k as usize];
    // Lagrange basis at x = 0: w_j = prod_{m != j} x_m / (x_j + x_m).
    let mut weights = Vec::with_capacity(used.len());
    for (j, sj) in used.iter().enumerate() {
        let mut w = 1u8;
        for (m, sm) in used.iter().enumerate() {
            if m == j {
                continue;
            }
            let denom = gf_add(sj.x, sm.x);
            // denom != 0 because x values are distinct.
            w = gf_mul(w, gf_mul(sm.x, gf_inv(denom).expect("distinct x")));
        }
        weights.push((j, w));
    }

    let len = used[0].payload.len();
    let mut secret = vec![0u8; len];
    for (j, w) in weights {
        for (i, out) in secret.iter_mut().enumerate() {
            *out = gf_add(*out, gf_mul(w, used[j].payload[i]));
        }
    }
    Ok(secret)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// RngCore stub that replays a fixed byte sequence. Used to force
    /// specific polynomial coefficients in oracle tests.
    struct FixedBytes {
        bytes: Vec<u8>,
        pos: usize,
    }

    impl RngCore for FixedBytes {
        fn next_u32(&mut self) -> u32 {
            let mut b = [0u8; 4];
            self.fill_bytes(&mut b);
            u32::from_le_bytes(b)
        }
        fn next_u64(&mut self) -> u64 {
            let mut b = [0u8; 8];
            self.fill_bytes(&mut b);
            u64::from_le_bytes(b)
        }
        fn fill_bytes(&mut self, dest: &mut [u8]) {
            for d in dest {
                *d = self.bytes[self.pos % self.bytes.len()];
                self.pos += 1;
            }
        }
        fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
            self.fill_bytes(dest);
            Ok(())
        }
    }

    #[test]
    fn k1_is_plain_replication() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let set = split(&[0x07], 1, 3, &mut rng).unwrap();
        assert_eq!(set.shares.len(), 3);
        for s in &set.shares {
            assert_eq!(s.payload, vec![0x07]);
        }
    }

    #[test]
    fn forced_coefficient_matches_forward_evaluation() {
        // Coefficient forced to 0x01: share byte = s ^ gf_mul(0x01, x).
        let mut rng = FixedBytes { bytes: vec![0x01], pos: 0 };
        let set = split(&[0x2A], 2, 2, &mut rng).unwrap();
        assert_eq!(set.shares[0], Share { x: 1, payload: vec![0x2B] });
        assert_eq!(set.shares[1], Share { x: 2, payload: vec![0x28] });
        assert_eq!(reconstruct(&set.shares, 2).unwrap(), vec![0x2A]);
    }

    #[test]
    fn parameter_errors() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(matches!(split(&[1], 0, 3, &mut rng), Err(SharingError::InvalidParams(_))));
        assert!(matches!(split(&[1], 4, 3, &mut rng), Err(SharingError::InvalidParams(_))));
        assert!(matches!(split(&[], 1, 1, &mut rng), Err(SharingError::InvalidParams(_))));
    }

    #[test]
    fn insufficient_and_duplicate_shares_error() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let set = split(b"hello", 3, 5, &mut rng).unwrap();
        let err = reconstruct(&set.shares[..2], 3).unwrap_err();
        assert_eq!(err, SharingError::InsufficientShares { have: 2, need: 3 });

        let dup = vec![set.shares[0].clone(), set.shares[0].clone(), set.shares[1].clone()];
        assert_eq!(reconstruct(&dup, 3).unwrap_err(), SharingError::DuplicateShare(1));

        let mut bad = set.shares.clone();
        bad[1].payload.pop();
        assert!(matches!(reconstruct(&bad, 3), Err(SharingError::MalformedShare(_))));
    }

    #[test]
    fn round_trip_random_cases() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let len = rng.gen_range(1..=64);
            let msg: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let n = rng.gen_range(1..=8u8);
            let k = rng.gen_range(1..=n);
            let set = split(&msg, k, n, &mut rng).unwrap();
            // A random k-subset.
            let mut idx: Vec<usize> = (0..n as usize).collect();
            for i in (1..idx.len()).rev() {
                idx.swap(i, rng.gen_range(0..=i));
            }
            let subset: Vec<Share> =
                idx[..k as usize].iter().map(|&i| set.shares[i].clone()).collect();
            assert_eq!(reconstruct(&subset, k).unwrap(), msg);
        }
    }

    #[test]
    fn perfect_secrecy_at_k2_exact() {
        // For every secret byte and evaluation point, the share byte is a
        // bijection of the coefficient, so its marginal is exactly uniform.
        for s in [0x00u8, 0x2A, 0x7F, 0xFF] {
            for x in 1..=3u8 {
                let mut seen = [false; 256];
                for c in 0..=255u8 {
                    let y = gf_add(s, gf_mul(c, x));
                    assert!(!seen[y as usize]);
                    seen[y as usize] = true;
                }
            }
        }
    }

    #[test]
    fn statistical_secrecy_k3_chi_square() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let trials = 100_000usize;
        let mut counts = [0u64; 256];
        for _ in 0..trials {
            let set = split(&[0x5A], 3, 3, &mut rng).unwrap();
            counts[set.shares[0].payload[0] as usize] += 1;
        }
        let expected = trials as f64 / 256.0;
        let chi2: f64 =
            counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let crit = ChiSquared::new(255.0).unwrap().inverse_cdf(0.999);
        assert!(chi2 < crit, "chi2 = {chi2}, critical = {crit}");
    }
}
