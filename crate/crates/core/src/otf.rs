//! On-the-fly accumulation of `A_i = B_i H_i` for power-of-two radices.
//!
//! Each step only selects one of a few maintained bit vectors and appends the
//! trailing `mu` bits of a small integer; previously formed bits are copied,
//! never recomputed. The narrow form keeps `{A - 1, A}` and accepts
//! `|v| < beta`; the wide form keeps `{A - 2, A - 1, A, A + 1}` and accepts
//! `|v| < 2 beta - 1`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{DsmError, Result};
use crate::numeric::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OtfMode {
    /// One bit of overlap: vectors for `A - 1` and `A`.
    Narrow,
    /// Two bits of overlap: vectors for `A - 2 .. A + 1`.
    Wide,
}

impl OtfMode {
    /// Offsets `d` of the maintained vectors `A + d`, ascending.
    pub fn offsets(self) -> &'static [i64] {
        match self {
            OtfMode::Narrow => &[-1, 0],
            OtfMode::Wide => &[-2, -1, 0, 1],
        }
    }

    pub fn overlap_bits(self) -> u32 {
        match self {
            OtfMode::Narrow => 1,
            OtfMode::Wide => 2,
        }
    }

    /// Exclusive bound on `|v|` for digits after the first.
    pub fn digit_limit(self, beta: u64) -> BigInt {
        match self {
            OtfMode::Narrow => BigInt::from(beta),
            OtfMode::Wide => BigInt::from(2 * beta as u128 - 1),
        }
    }

    fn name(self) -> &'static str {
        match self {
            OtfMode::Narrow => "narrow",
            OtfMode::Wide => "wide",
        }
    }
}

impl FromStr for OtfMode {
    type Err = DsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "narrow" => Ok(OtfMode::Narrow),
            "wide" => Ok(OtfMode::Wide),
            other => Err(DsmError::Parse(format!("unknown otf mode `{other}`"))),
        }
    }
}

impl fmt::Display for OtfMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Two's-complement bit string, most significant (sign) bit first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TwosBits {
    bits: Vec<bool>,
}

impl TwosBits {
    /// Smallest width that represents `n` in two's complement.
    pub fn min_width(n: &BigInt) -> usize {
        let mag = if n.is_negative() { -n - 1 } else { n.clone() };
        mag.bits() as usize + 1
    }

    /// `n` in exactly `width` bits; `n` must fit.
    pub fn from_int(n: &BigInt, width: usize) -> Self {
        debug_assert!(width >= Self::min_width(n));
        let m = if n.is_negative() { (BigInt::one() << width) + n } else { n.clone() };
        let bits = (0..width).rev().map(|k| m.bit(k as u64)).collect();
        TwosBits { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn value(&self) -> BigInt {
        let mut acc = BigInt::zero();
        for &b in &self.bits {
            acc = (acc << 1) + u8::from(b);
        }
        if self.bits.first() == Some(&true) {
            acc - (BigInt::one() << self.bits.len())
        } else {
            acc
        }
    }

    /// `self` followed by `low`.
    pub fn concat(&self, low: &[bool]) -> Self {
        let mut bits = Vec::with_capacity(self.bits.len() + low.len());
        bits.extend_from_slice(&self.bits);
        bits.extend_from_slice(low);
        TwosBits { bits }
    }

    /// Copy sign-extended to `width` bits (for display).
    pub fn sign_extended(&self, width: usize) -> Self {
        let sign = self.bits.first().copied().unwrap_or(false);
        let mut bits = vec![sign; width.saturating_sub(self.bits.len())];
        bits.extend_from_slice(&self.bits);
        TwosBits { bits }
    }
}

impl fmt::Display for TwosBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Selection made for one maintained target `A_new + offset`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OtfChoice {
    pub offset: i64,
    /// The predecessor `A_old + selector` that was copied.
    pub selector: i64,
    pub appended: TwosBits,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OtfStep {
    pub index: usize,
    pub beta: u64,
    pub digit: BigInt,
    pub choices: Vec<OtfChoice>,
}

/// Maintained vectors for `A + d`, one per offset of the mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OtfAccumulator {
    mode: OtfMode,
    vectors: Vec<TwosBits>,
    radix_bits: Vec<u32>,
    history: Vec<OtfStep>,
}

/// Starts from the first digit, which may have any magnitude.
pub fn otf_init(mode: OtfMode, v1: &BigInt) -> OtfAccumulator {
    let values: Vec<BigInt> = mode.offsets().iter().map(|d| v1 + d).collect();
    let width = values.iter().map(TwosBits::min_width).max().unwrap_or(1);
    OtfAccumulator {
        mode,
        vectors: values.iter().map(|n| TwosBits::from_int(n, width)).collect(),
        radix_bits: Vec::new(),
        history: Vec::new(),
    }
}

/// Appends `v` in radix `beta`, returning the new accumulator.
pub fn otf_append(acc: &OtfAccumulator, beta: u64, v: &BigInt) -> Result<OtfAccumulator> {
    if beta < 2 || !beta.is_power_of_two() {
        return Err(DsmError::param("beta", format!("{beta} is not a power of two >= 2")));
    }
    let limit = acc.mode.digit_limit(beta);
    if v.abs() >= limit {
        return Err(DsmError::DigitOutOfRange {
            digit: v.to_string(),
            mode: acc.mode.name(),
            limit: limit.to_string(),
        });
    }
    let mu = beta.trailing_zeros() as usize;
    let overlap = acc.mode.overlap_bits() as usize;
    let index = acc.radix_bits.len() + 2;
    let mut vectors = Vec::with_capacity(acc.vectors.len());
    let mut choices = Vec::with_capacity(acc.vectors.len());
    for &offset in acc.mode.offsets() {
        let z = v + offset;
        // leading `overlap` bits of the (mu + overlap)-bit form select the predecessor
        let form = TwosBits::from_int(&z, mu + overlap);
        let (lead, low) = form.bits().split_at(overlap);
        let selector = i64::try_from(TwosBits { bits: lead.to_vec() }.value()).expect("small");
        let pred = acc.vector(selector).ok_or_else(|| DsmError::Invariant {
            step: index,
            what: format!("selector {selector} outside maintained set"),
        })?;
        let next = pred.concat(low);
        if next.bits()[..pred.len()] != *pred.bits() {
            return Err(DsmError::Invariant {
                step: index,
                what: "high bits changed during append".into(),
            });
        }
        choices.push(OtfChoice {
            offset,
            selector,
            appended: TwosBits { bits: low.to_vec() },
        });
        vectors.push(next);
    }
    let mut history = acc.history.clone();
    history.push(OtfStep {
        index,
        beta,
        digit: v.clone(),
        choices,
    });
    let mut radix_bits = acc.radix_bits.clone();
    radix_bits.push(mu as u32);
    let out = OtfAccumulator {
        mode: acc.mode,
        vectors,
        radix_bits,
        history,
    };
    out.check_neighbors(index)?;
    Ok(out)
}

pub fn otf_value(acc: &OtfAccumulator) -> BigInt {
    acc.value()
}

/// `A_i / B_i`.
pub fn otf_head(acc: &OtfAccumulator, cumulative: &BigInt) -> Rational {
    Rational::new(acc.value(), cumulative.clone())
}

impl OtfAccumulator {
    pub fn mode(&self) -> OtfMode {
        self.mode
    }

    /// Vector for `A + offset`, if maintained.
    pub fn vector(&self, offset: i64) -> Option<&TwosBits> {
        let pos = self.mode.offsets().iter().position(|&d| d == offset)?;
        Some(&self.vectors[pos])
    }

    pub fn value(&self) -> BigInt {
        self.vector(0).expect("A is always maintained").value()
    }

    pub fn radix_bits(&self) -> &[u32] {
        &self.radix_bits
    }

    pub fn history(&self) -> &[OtfStep] {
        &self.history
    }

    fn check_neighbors(&self, step: usize) -> Result<()> {
        let a = self.value();
        for (&d, vec) in self.mode.offsets().iter().zip(&self.vectors) {
            if vec.value() != &a + d {
                return Err(DsmError::Invariant {
                    step,
                    what: format!("vector for A{d:+} reads back {}", vec.value()),
                });
            }
        }
        Ok(())
    }

    /// Per-step binary strings of every maintained vector with the selections made.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let width = self.vectors.iter().map(TwosBits::len).max().unwrap_or(0);
        out.push_str(&format!("mode {} value {}\n", self.mode, self.value()));
        for step in &self.history {
            out.push_str(&format!("step {} beta {} v {}\n", step.index, step.beta, step.digit));
            for c in &step.choices {
                out.push_str(&format!(
                    "  A{:+}: from A{:+} append {}\n",
                    c.offset, c.selector, c.appended
                ));
            }
        }
        for (&d, vec) in self.mode.offsets().iter().zip(&self.vectors) {
            out.push_str(&format!("A{:+} = {} ({})\n", d, vec.sign_extended(width), vec.value()));
        }
        out
    }
}

/// Accumulates a whole digit sequence; `betas[0]` is not used for the first digit.
pub fn otf_accumulate(mode: OtfMode, betas: &[u64], digits: &[BigInt]) -> Result<OtfAccumulator> {
    if digits.is_empty() {
        return Err(DsmError::param("digits", "need at least one digit"));
    }
    if betas.len() < digits.len() {
        return Err(DsmError::ConfigTooShort {
            available: betas.len(),
            requested: digits.len(),
        });
    }
    let mut acc = otf_init(mode, &digits[0]);
    for (beta, v) in betas[1..].iter().zip(&digits[1..]) {
        acc = otf_append(&acc, *beta, v)?;
    }
    Ok(acc)
}

/// `A_n = sum_j v_j B_n / B_j` by repeated multiply-add.
pub fn reference_accumulate(betas: &[u64], digits: &[BigInt]) -> BigInt {
    let mut a = digits.first().cloned().unwrap_or_default();
    for (beta, v) in betas.iter().skip(1).zip(digits.iter().skip(1)) {
        a = a * *beta + v;
    }
    a
}
