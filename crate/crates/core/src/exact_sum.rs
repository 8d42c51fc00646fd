//! Order-independent summation of non-negative doubles.
//!
//! Every finite non-negative `f64` is an integer multiple of `2^-1074`, so a
//! wide fixed-point accumulator holds the exact sum. Merging two
//! accumulators is integer addition, which makes the final rounding
//! independent of how the terms were partitioned or ordered.

const LIMB_BITS: u32 = 32;
const LIMB_MASK: u64 = (1 << LIMB_BITS) - 1;
/// Bit 0 of limb 0 has weight `2^-1074`.
const BIAS: i32 = 1074;
/// Covers exponents up to 2^1024 plus carry headroom.
const LIMBS: usize = 70;
/// Additions allowed between carry normalizations (each adds < 2^32 per limb).
const FLUSH_EVERY: u32 = 1 << 30;

#[derive(Clone, Debug)]
pub(crate) struct ExactSum {
    limbs: [u64; LIMBS],
    pending: u32,
}

impl Default for ExactSum {
    fn default() -> Self {
        ExactSum {
            limbs: [0; LIMBS],
            pending: 0,
        }
    }
}

impl ExactSum {
    pub(crate) fn add(&mut self, x: f64) {
        debug_assert!(x >= 0.0 && x.is_finite());
        if x == 0.0 {
            return;
        }
        let bits = x.to_bits();
        let exp_field = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        // value = mantissa * 2^(shift - BIAS)
        let (mantissa, shift) = if exp_field == 0 {
            (frac, 0)
        } else {
            (frac | (1u64 << 52), exp_field - 1)
        };
        let limb = (shift as u32 / LIMB_BITS) as usize;
        let offset = shift as u32 % LIMB_BITS;
        let wide = (mantissa as u128) << offset;
        self.limbs[limb] += (wide as u64) & LIMB_MASK;
        self.limbs[limb + 1] += ((wide >> 32) as u64) & LIMB_MASK;
        self.limbs[limb + 2] += ((wide >> 64) as u64) & LIMB_MASK;
        self.pending += 1;
        if self.pending >= FLUSH_EVERY {
            self.normalize();
        }
    }

    pub(crate) fn merge(&mut self, other: &ExactSum) {
        let mut other = other.clone();
        other.normalize();
        self.normalize();
        for (a, b) in self.limbs.iter_mut().zip(other.limbs.iter()) {
            *a += *b;
        }
        self.normalize();
    }

    fn normalize(&mut self) {
        let mut carry = 0u64;
        for limb in self.limbs.iter_mut() {
            let v = *limb + carry;
            *limb = v & LIMB_MASK;
            carry = v >> LIMB_BITS;
        }
        debug_assert_eq!(carry, 0);
        self.pending = 0;
    }

    /// Value of the sum, from the canonical (normalized) limbs.
    pub(crate) fn value(&self) -> f64 {
        let mut norm = self.clone();
        norm.normalize();
        let Some(top) = norm.limbs.iter().rposition(|&l| l != 0) else {
            return 0.0;
        };
        // Three limbs carry 65+ significant bits; combine from the bottom up
        // so the two small terms round together before meeting the top one.
        let lo = top.saturating_sub(2);
        let mut v = 0.0;
        for i in lo..=top {
            let exp = (i as i32) * LIMB_BITS as i32 - BIAS;
            v += ldexp(norm.limbs[i] as f64, exp);
        }
        v
    }
}

fn ldexp(x: f64, exp: i32) -> f64 {
    libm::ldexp(x, exp)
}
