//! Fixed-point big-integer arithmetic with rigorous error tracking.
//!
//! Values are `BigInt` mantissas with an implied scale of 2^-bits. Every
//! truncating operation contributes at most one unit in the last place,
//! and the accumulated absolute error is carried alongside each value as
//! a log2-domain bound, so callers can certify the final result.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::numeric::log2_add;

/// A nonnegative fixed-point value together with a certified absolute
/// error bound (log2 of the bound; `-inf` means exact).
#[derive(Clone, Debug)]
pub(crate) struct Tracked {
    pub mantissa: BigInt,
    /// log2 of an upper bound on |stored - true| in value units.
    pub err_log2: f64,
    /// log2 of an upper bound on the true magnitude.
    pub mag_log2: f64,
}

/// Converts `x >= 0` to fixed point with `bits` fractional bits,
/// truncating toward zero.
pub(crate) fn from_f64(x: f64, bits: u32) -> Tracked {
    debug_assert!(x >= 0.0 && x.is_finite());
    let (mantissa, exact) = shift_f64(x, bits);
    Tracked {
        mantissa,
        err_log2: if exact { f64::NEG_INFINITY } else { -(bits as f64) },
        mag_log2: if x > 0.0 { x.log2() + 1e-9 } else { f64::NEG_INFINITY },
    }
}

/// Returns (floor(x * 2^bits) as BigInt, whether the conversion was exact).
fn shift_f64(x: f64, bits: u32) -> (BigInt, bool) {
    if x == 0.0 {
        return (BigInt::zero(), true);
    }
    let b = x.to_bits();
    let raw_exp = ((b >> 52) & 0x7ff) as i64;
    let frac = b & ((1u64 << 52) - 1);
    let (mant, exp) = if raw_exp == 0 {
        (frac, -1074i64)
    } else {
        (frac | (1u64 << 52), raw_exp - 1075)
    };
    let shift = exp + bits as i64;
    let big = BigInt::from(mant);
    if shift >= 0 {
        (big << shift as u64, true)
    } else {
        let s = (-shift) as u64;
        let truncated = &big >> s;
        let exact = (&truncated << s) == big;
        (truncated, exact)
    }
}

/// Truncating fixed-point product of nonnegative operands.
fn mul_trunc(a: &BigInt, b: &BigInt, bits: u32) -> BigInt {
    (a * b) >> bits as u64
}

/// Raises `base` to the `exp`-th power by binary exponentiation, truncating
/// after every multiplication and propagating the error bound.
pub(crate) fn pow_trunc(base: &Tracked, exp: u32, bits: u32) -> Tracked {
    debug_assert!(exp >= 1);
    debug_assert!(!base.mantissa.is_negative());
    let neg_bits = -(bits as f64);
    let mut result: Option<Tracked> = None;
    let mut sq = base.clone();
    let mut e = exp;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => sq.clone(),
                Some(r) => {
                    let err = log2_add(
                        log2_add(r.err_log2 + sq.mag_log2, sq.err_log2 + r.mag_log2),
                        log2_add(r.err_log2 + sq.err_log2, neg_bits),
                    );
                    Tracked {
                        mantissa: mul_trunc(&r.mantissa, &sq.mantissa, bits),
                        err_log2: err,
                        mag_log2: r.mag_log2 + sq.mag_log2,
                    }
                }
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        let err = log2_add(
            log2_add(1.0 + sq.err_log2 + sq.mag_log2, 2.0 * sq.err_log2),
            neg_bits,
        );
        sq = Tracked {
            mantissa: mul_trunc(&sq.mantissa, &sq.mantissa, bits),
            err_log2: err,
            mag_log2: 2.0 * sq.mag_log2,
        };
    }
    result.expect("exp >= 1")
}

/// Converts `v * 2^exp2` to f64 (round-to-nearest on the top 64 bits).
pub(crate) fn big_to_f64_pow2(v: &BigInt, exp2: i64) -> f64 {
    let nbits = v.bits() as i64;
    if nbits == 0 {
        return 0.0;
    }
    // keep the top 64 bits so the u64 -> f64 conversion is the only rounding
    let (reduced, shift) = if nbits > 64 {
        (v >> (nbits - 64) as u64, nbits - 64)
    } else {
        (v.clone(), 0)
    };
    let x = reduced.to_f64().expect("fits in f64 range");
    x * exp2f(exp2 + shift)
}

/// 2^e as f64, handling exponents beyond the normal range by splitting.
fn exp2f(e: i64) -> f64 {
    if (-1000..=1000).contains(&e) {
        (e as f64).exp2()
    } else if e > 0 {
        f64::INFINITY
    } else {
        // subnormal or underflow territory: split the exponent
        let half = e / 2;
        (half as f64).exp2() * ((e - half) as f64).exp2()
    }
}
