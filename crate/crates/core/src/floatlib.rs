// SPDX-License-Identifier: Apache-2.0

//! Bit-level IEEE-754 binary32 model backing float cells and constants.
//!
//! Values are carried as raw 32-bit patterns everywhere (IR constants, memory
//! images, simulation state); arithmetic goes through the host's conforming
//! binary32 unit in round-to-nearest-even. The contract is bit-level: the
//! interpreter and the simulator both route through this module, so their
//! results agree bit-for-bit.

use serde::{Deserialize, Serialize};

/// A binary32 value as its raw bit pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct F32Bits(pub u32);

impl F32Bits {
    pub const ZERO: F32Bits = F32Bits(0x0000_0000);
    pub const NEG_ZERO: F32Bits = F32Bits(0x8000_0000);
    pub const ONE: F32Bits = F32Bits(0x3F80_0000);

    pub fn from_f32(v: f32) -> F32Bits {
        F32Bits(v.to_bits())
    }

    pub fn to_f32(self) -> f32 {
        f32::from_bits(self.0)
    }

    pub fn is_nan(self) -> bool {
        self.to_f32().is_nan()
    }
}

/// Round-to-nearest-even encoding of a decimal literal.
pub fn f32_encode(text: &str) -> Option<F32Bits> {
    let v: f32 = text.parse().ok()?;
    Some(F32Bits::from_f32(v))
}

/// Shortest decimal string that round-trips to the same bit pattern.
pub fn f32_decode(bits: F32Bits) -> String {
    let v = bits.to_f32();
    if v.is_nan() {
        return "NaN".to_string();
    }
    let mut s = format!("{}", v);
    if !s.contains(['.', 'e', 'E', 'i']) {
        s.push_str(".0");
    }
    s
}

pub fn f32_add(a: F32Bits, b: F32Bits) -> F32Bits {
    F32Bits::from_f32(a.to_f32() + b.to_f32())
}

pub fn f32_mul(a: F32Bits, b: F32Bits) -> F32Bits {
    F32Bits::from_f32(a.to_f32() * b.to_f32())
}

pub fn f32_div(a: F32Bits, b: F32Bits) -> F32Bits {
    F32Bits::from_f32(a.to_f32() / b.to_f32())
}

/// Comparison predicates available on float compare cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn keyword(self) -> &'static str {
        match self {
            CmpOp::Lt => "lt",
            CmpOp::Le => "le",
            CmpOp::Eq => "eq",
            CmpOp::Ne => "ne",
            CmpOp::Gt => "gt",
            CmpOp::Ge => "ge",
        }
    }

    pub fn from_keyword(s: &str) -> Option<CmpOp> {
        Some(match s {
            "lt" => CmpOp::Lt,
            "le" => CmpOp::Le,
            "eq" => CmpOp::Eq,
            "ne" => CmpOp::Ne,
            "gt" => CmpOp::Gt,
            "ge" => CmpOp::Ge,
            _ => return None,
        })
    }

    pub fn eval_int(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

/// IEEE-754 comparison; unordered (NaN) compares false except `ne`.
pub fn f32_cmp(op: CmpOp, a: F32Bits, b: F32Bits) -> bool {
    let (x, y) = (a.to_f32(), b.to_f32());
    match op {
        CmpOp::Lt => x < y,
        CmpOp::Le => x <= y,
        CmpOp::Eq => x == y,
        CmpOp::Ne => x != y,
        CmpOp::Gt => x > y,
        CmpOp::Ge => x >= y,
    }
}

const EXP_TABLE_SIZE: usize = 64;
const EXP_LO: f32 = -8.0;
const EXP_HI: f32 = 8.0;

fn exp_table() -> &'static [f32; EXP_TABLE_SIZE] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[f32; EXP_TABLE_SIZE]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0f32; EXP_TABLE_SIZE];
        let step = (EXP_HI as f64 - EXP_LO as f64) / (EXP_TABLE_SIZE as f64 - 1.0);
        for (k, slot) in t.iter_mut().enumerate() {
            *slot = (EXP_LO as f64 + step * k as f64).exp() as f32;
        }
        t
    })
}

/// Table-based exponential: clamp to [-8, 8], then linearly interpolate a
/// 64-entry table. This is the semantics of the `float_exp` unit; the
/// interpreter uses the same routine so transformed programs stay bit-exact.
pub fn f32_exp_table(x: F32Bits) -> F32Bits {
    let v = x.to_f32();
    if v.is_nan() {
        return x;
    }
    let t = exp_table();
    let clamped = if v < EXP_LO {
        EXP_LO
    } else if v > EXP_HI {
        EXP_HI
    } else {
        v
    };
    let scale = (EXP_TABLE_SIZE as f32 - 1.0) / (EXP_HI - EXP_LO);
    let pos = (clamped - EXP_LO) * scale;
    let k = (pos as usize).min(EXP_TABLE_SIZE - 2);
    let frac = pos - k as f32;
    let lo = t[k];
    let hi = t[k + 1];
    F32Bits::from_f32(lo + frac * (hi - lo))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_one() {
        assert_eq!(f32_encode("1.0").unwrap(), F32Bits(0x3F80_0000));
    }

    #[test]
    fn signed_zeros() {
        assert_eq!(f32_encode("0.0").unwrap(), F32Bits(0x0000_0000));
        assert_eq!(f32_encode("-0.0").unwrap(), F32Bits(0x8000_0000));
    }

    #[test]
    fn add_one_one() {
        assert_eq!(f32_add(F32Bits::ONE, F32Bits::ONE), F32Bits(0x4000_0000));
    }

    #[test]
    fn x_plus_neg_x_is_pos_zero() {
        for v in [1.5f32, 0.1, 1e20, -3.25] {
            let r = f32_add(F32Bits::from_f32(v), F32Bits::from_f32(-v));
            assert_eq!(r, F32Bits::ZERO);
        }
    }

    #[test]
    fn decode_shortest_roundtrip() {
        let enc = f32_encode("0.1").unwrap();
        let s = f32_decode(enc);
        assert_eq!(f32_encode(&s).unwrap(), enc);
    }

    #[test]
    fn add_commutes() {
        let mut x = 0x12345u64;
        for _ in 0..1000 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = F32Bits((x >> 32) as u32);
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = F32Bits((x >> 32) as u32);
            if a.is_nan() || b.is_nan() {
                continue;
            }
            assert_eq!(f32_add(a, b), f32_add(b, a));
        }
    }

    #[test]
    fn exp_table_monotone_region() {
        let a = f32_exp_table(F32Bits::from_f32(0.0)).to_f32();
        let b = f32_exp_table(F32Bits::from_f32(1.0)).to_f32();
        assert!(b > a && a > 0.9 && a < 1.1);
        // clamping: far-out inputs hit the endpoints
        assert_eq!(
            f32_exp_table(F32Bits::from_f32(-1e9)),
            f32_exp_table(F32Bits::from_f32(-8.0))
        );
    }
}
