//! Exact rational helpers and the scalar abstraction shared by the engine and
//! the bound calculator.
//!
//! All certified results are computed over [`Rational`] (an arbitrary precision
//! `BigRational`, always kept in lowest terms). The [`Scalar`] trait lets the
//! generic parts of the crate also run over `f32`/`f64` for quick exploration.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

use crate::error::{DsmError, Result};

/// Exact arbitrary precision rational.
pub type Rational = BigRational;

/// Number type the generic machinery is written against.
///
/// Implementations must provide an exact floor to an integer and exact
/// conversions to and from rationals (for binary floats `to_rational` is exact;
/// `from_rational` rounds).
pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed + Send + Sync + 'static {
    fn from_integer(n: &BigInt) -> Self;
    fn from_rational(q: &Rational) -> Self;
    fn to_rational(&self) -> Rational;
    fn floor_integer(&self) -> BigInt;

    /// True when arithmetic on this type is exact.
    fn is_exact() -> bool {
        false
    }

    fn from_i64(n: i64) -> Self {
        Self::from_integer(&BigInt::from(n))
    }

    fn half() -> Self {
        Self::one() / (Self::one() + Self::one())
    }

    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(&self.to_rational()).unwrap_or(f64::NAN)
    }

    /// `sum a_k b_k`.
    fn sum_of_products(pairs: &[(&Self, &Self)]) -> Self {
        pairs
            .iter()
            .fold(Self::zero(), |acc, (a, b)| acc + (*a).clone() * (*b).clone())
    }
}

impl Scalar for Rational {
    fn from_integer(n: &BigInt) -> Self {
        Rational::from_integer(n.clone())
    }

    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }

    fn to_rational(&self) -> Rational {
        self.clone()
    }

    fn floor_integer(&self) -> BigInt {
        self.numer().div_floor(self.denom())
    }

    /// Sums over a common denominator and reduces once.
    fn sum_of_products(pairs: &[(&Self, &Self)]) -> Self {
        let dens: Vec<BigInt> = pairs.iter().map(|(a, b)| a.denom() * b.denom()).collect();
        let l = dens.iter().fold(BigInt::one(), |l, d| l.lcm(d));
        let num = pairs
            .iter()
            .zip(&dens)
            .fold(BigInt::zero(), |acc, ((a, b), d)| acc + a.numer() * b.numer() * (&l / d));
        Rational::new(num, l)
    }

    fn is_exact() -> bool {
        true
    }
}

macro_rules! impl_float_scalar {
    ($f:ty, $to:ident) => {
        impl Scalar for $f {
            fn from_integer(n: &BigInt) -> Self {
                ToPrimitive::$to(n).unwrap_or(<$f>::NAN)
            }

            fn from_rational(q: &Rational) -> Self {
                ToPrimitive::$to(q).unwrap_or(<$f>::NAN)
            }

            fn to_rational(&self) -> Rational {
                Rational::from_float(*self).expect("finite float")
            }

            fn floor_integer(&self) -> BigInt {
                BigInt::from_f64(self.floor() as f64).expect("finite float")
            }

            fn as_f64(&self) -> f64 {
                *self as f64
            }
        }
    };
}

impl_float_scalar!(f32, to_f32);
impl_float_scalar!(f64, to_f64);

/// Tie rule applied by [`round_to_nearest_int`] at exact half-integers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TieRule {
    #[default]
    HalfEven,
    HalfUp,
    HalfDown,
    HalfAwayFromZero,
}

/// Returns an integer `m` with `|z - m| <= 1/2`, resolving exact midpoints by `tie`.
pub fn round_to_nearest_int<S: Scalar>(z: &S, tie: TieRule) -> BigInt {
    let fl = z.floor_integer();
    let frac = z.clone() - S::from_integer(&fl);
    let half = S::half();
    if frac < half {
        return fl;
    }
    if frac > half {
        return fl + 1;
    }
    let up = &fl + 1;
    match tie {
        TieRule::HalfEven => {
            if fl.is_even() {
                fl
            } else {
                up
            }
        }
        TieRule::HalfUp => up,
        TieRule::HalfDown => fl,
        TieRule::HalfAwayFromZero => {
            if fl.sign() == Sign::Minus {
                fl
            } else {
                up
            }
        }
    }
}

pub fn floor_rational(z: &Rational) -> BigInt {
    z.floor_integer()
}

pub fn ceil_rational(z: &Rational) -> BigInt {
    z.numer().div_ceil(z.denom())
}

/// `2^e` as a scalar, for any integer `e`.
pub fn pow2<S: Scalar>(e: i64) -> S {
    let p = S::from_integer(&(BigInt::one() << e.unsigned_abs()));
    if e >= 0 {
        p
    } else {
        S::one() / p
    }
}

/// Largest multiple of `2^-f` not exceeding `z`.
pub fn truncate_frac_bits<S: Scalar>(z: &S, f: u32) -> S {
    let scale: S = pow2(i64::from(f));
    let scaled = z.clone() * scale.clone();
    S::from_integer(&scaled.floor_integer()) / scale
}

/// Rounding used by [`decimal_round`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DecimalMode {
    /// Half away from zero.
    Nearest,
    /// Toward +infinity.
    Ceiling,
}

impl FromStr for DecimalMode {
    type Err = DsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nearest" => Ok(DecimalMode::Nearest),
            "ceiling" | "ceil" => Ok(DecimalMode::Ceiling),
            other => Err(DsmError::Parse(format!("unknown rounding mode `{other}`"))),
        }
    }
}

/// Fixed-point decimal rendering with exactly `digits` fractional digits.
pub fn decimal_round(z: &Rational, digits: u32, mode: DecimalMode) -> String {
    let scale = BigInt::from(10u32).pow(digits);
    let scaled = z * Rational::from_integer(scale.clone());
    let n = match mode {
        DecimalMode::Ceiling => ceil_rational(&scaled),
        DecimalMode::Nearest => round_to_nearest_int(&scaled, TieRule::HalfAwayFromZero),
    };
    let neg = n.is_negative();
    let mag = n.abs();
    let (int, frac) = mag.div_rem(&scale);
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(&int.to_string());
    if digits > 0 {
        let f = frac.to_string();
        out.push('.');
        for _ in f.len()..digits as usize {
            out.push('0');
        }
        out.push_str(&f);
    }
    out
}

/// `floor(sqrt(n))` for `n >= 0`.
pub fn isqrt(n: &BigInt) -> Result<BigInt> {
    if n.is_negative() {
        return Err(DsmError::Domain(format!("isqrt of negative integer {n}")));
    }
    Ok(n.sqrt())
}

/// Rational bracket `lo <= sqrt(x) < lo + 2^-bits`, with `lo` a multiple of `2^-bits`.
pub fn sqrt_bracket(x: &Rational, bits: u32) -> Result<(Rational, Rational)> {
    if x.is_negative() {
        return Err(DsmError::Domain(format!("sqrt of negative rational {x}")));
    }
    let scale = BigInt::one() << (2 * bits as usize);
    let scaled = floor_rational(&(x * Rational::from_integer(scale)));
    // floor(sqrt(floor(y))) == floor(sqrt(y)) for y >= 0
    let root = isqrt(&scaled)?;
    let ulp: Rational = pow2(-i64::from(bits));
    let lo = Rational::from_integer(root) * &ulp;
    let hi = &lo + ulp;
    Ok((lo, hi))
}

/// Parses `"p/q"`, a plain integer, or a power of two such as `"2^-9"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let t = s.trim();
    let bad = || DsmError::Parse(format!("invalid rational `{s}`"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((base, exp)) = t.split_once('^') {
        let (neg, base) = match base.trim().strip_prefix('-') {
            Some(b) => (true, b),
            None => (false, base.trim()),
        };
        let base = BigInt::from_str(base).map_err(|_| bad())?;
        let exp: i64 = exp.trim().parse().map_err(|_| bad())?;
        if base.is_zero() && exp < 0 {
            return Err(bad());
        }
        let mag = Rational::from_integer(base.pow(exp.unsigned_abs() as u32));
        let v = if exp >= 0 { mag } else { mag.recip() };
        return Ok(if neg { -v } else { v });
    }
    if let Some((p, q)) = t.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
        if q.is_zero() {
            return Err(DsmError::Parse(format!("zero denominator in `{s}`")));
        }
        return Ok(Rational::new(p, q));
    }
    BigInt::from_str(t)
        .map(Rational::from_integer)
        .map_err(|_| bad())
}

/// Emits `"p/q"` (the denominator is always written, even when it is 1).
pub fn format_rational(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Displays any scalar through its exact rational value.
pub fn display_scalar<S: Scalar>(s: &S) -> impl Display {
    format_rational(&s.to_rational())
}

/// Parses a comma separated list of rationals.
pub fn parse_rational_list(s: &str) -> Result<Vec<Rational>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(parse_rational)
        .collect()
}

/// Exponent `e` with `q == 2^e`, when `q` is a power of two.
pub fn exact_log2(q: &Rational) -> Option<i64> {
    let is_pow2 = |n: &BigInt| n.is_positive() && (n & (n - 1u32)).is_zero();
    if !is_pow2(q.numer()) || !is_pow2(q.denom()) {
        return None;
    }
    Some(q.numer().bits() as i64 - q.denom().bits() as i64)
}
