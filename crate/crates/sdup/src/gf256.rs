//! Arithmetic in GF(2^8) with reduction polynomial x^8 + x^4 + x^3 + x + 1
//! (0x11B, the AES polynomial).
//!
//! Addition is XOR. Multiplication goes through log/exp tables built once
//! from generator 0x03; the tables are cross-checked against a
//! carry-less peasant multiplier in the tests.

use std::sync::OnceLock;

use thiserror::Error;

/// Reduction polynomial for the field, kept explicit for the table builder.
pub const REDUCTION_POLY: u16 = 0x11B;

/// Generator used to build the log/exp tables. 0x03 is primitive for 0x11B.
const GENERATOR: u8 = 0x03;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GfError {
    #[error("division by zero in GF(256)")]
    DivisionByZero,
}

/// Bit-by-bit carry-less multiplication with modular reduction.
/// Slow but obviously correct; the table path is checked against it.
pub fn gf_mul_peasant(a: u8, b: u8) -> u8 {
    let mut acc: u16 = 0;
    let mut a = a as u16;
    let mut b = b;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        a <<= 1;
        if a & 0x100 != 0 {
            a ^= REDUCTION_POLY;
        }
        b >>= 1;
    }
    acc as u8
}

struct Tables {
    // exp[i] = g^i for i in 0..255, doubled so exp[log a + log b] needs no mod.
    exp: [u8; 510],
    log: [u8; 256],
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut exp = [0u8; 510];
        let mut log = [0u8; 256];
        let mut x: u8 = 1;
        for i in 0..255 {
            exp[i] = x;
            log[x as usize] = i as u8;
            x = gf_mul_peasant(x, GENERATOR);
        }
        for i in 255..510 {
            exp[i] = exp[i - 255];
        }
        Tables { exp, log }
    })
}

/// Field multiplication.
pub fn gf_mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        return 0;
    }
    let t = tables();
    t.exp[t.log[a as usize] as usize + t.log[b as usize] as usize]
}

/// Field addition (and subtraction).
#[inline]
pub fn gf_add(a: u8, b: u8) -> u8 {
    a ^ b
}

/// Multiplicative inverse of a nonzero element.
pub fn gf_inv(a: u8) -> Result<u8, GfError> {
    if a == 0 {
        return Err(GfError::DivisionByZero);
    }
    let t = tables();
    Ok(t.exp[255 - t.log[a as usize] as usize])
}

/// a / b.
pub fn gf_div(a: u8, b: u8) -> Result<u8, GfError> {
    Ok(gf_mul(a, gf_inv(b)?))
}
