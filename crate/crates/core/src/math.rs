//! 256-bit intermediate arithmetic for fixed-point products.
//!
//! 18-decimal token quantities multiplied together (or by 8-decimal prices)
//! routinely exceed `u128`; the pool and valuation formulas are defined with
//! exact floor semantics, so the intermediates are computed in 256 bits and
//! only a result that cannot fit 128 bits aborts the transition.

use crate::error::{Error, Result};

/// Full 256-bit product of two `u128`s as (hi, lo).
pub fn mul_wide(a: u128, b: u128) -> (u128, u128) {
    const MASK: u128 = (1u128 << 64) - 1;
    let (a_hi, a_lo) = (a >> 64, a & MASK);
    let (b_hi, b_lo) = (b >> 64, b & MASK);
    let ll = a_lo * b_lo;
    let lh = a_lo * b_hi;
    let hl = a_hi * b_lo;
    let hh = a_hi * b_hi;
    let (mid, mid_carry) = lh.overflowing_add(hl);
    let (lo, lo_carry) = ll.overflowing_add(mid << 64);
    let hi = hh + (mid >> 64) + (u128::from(mid_carry) << 64) + u128::from(lo_carry);
    (hi, lo)
}

/// floor(a × b / d) with a 256-bit intermediate. Errors if the quotient does
/// not fit in 128 bits (or on division by zero).
pub fn muldiv(a: u128, b: u128, d: u128) -> Result<u128> {
    if d == 0 {
        return Err(Error::Overflow);
    }
    let (hi, lo) = mul_wide(a, b);
    if hi == 0 {
        return Ok(lo / d);
    }
    if hi >= d {
        return Err(Error::Overflow);
    }
    // Restoring long division of (hi, lo) by d, one bit of lo at a time;
    // the invariant rem < d keeps the 129-bit step representable.
    let mut rem = hi;
    let mut quotient: u128 = 0;
    for i in (0..128).rev() {
        let bit = (lo >> i) & 1;
        let carry = rem >> 127;
        let candidate = (rem << 1) | bit;
        if carry == 1 || candidate >= d {
            rem = candidate.wrapping_sub(d);
            quotient = (quotient << 1) | 1;
        } else {
            rem = candidate;
            quotient <<= 1;
        }
    }
    Ok(quotient)
}

/// floor(sqrt(a × b)) with a 256-bit intermediate; always fits in `u128`.
pub fn isqrt_mul(a: u128, b: u128) -> u128 {
    let n = mul_wide(a, b);
    let mut low: u128 = 0;
    let mut high: u128 = u128::MAX;
    // Binary search for the largest r with r^2 <= n.
    while low < high {
        let mid = low + (high - low).div_ceil(2);
        if mul_wide(mid, mid) <= n {
            low = mid;
        } else {
            high = mid - 1;
        }
    }
    low
}
