use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul};

use crate::error::{DsmError, Result};
use crate::numeric::{display_scalar, Scalar};

/// Finite sum of terms `c * V^n` with `c > 0` and integer `n`, in canonical form
/// (one term per exponent, no zero coefficients).
///
/// Every such function is convex on the positive reals, so its maximum over a
/// closed interval is attained at an endpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Posynomial<S> {
    terms: BTreeMap<i32, S>,
}

impl<S: Scalar> Posynomial<S> {
    pub fn zero() -> Self {
        Posynomial {
            terms: BTreeMap::new(),
        }
    }

    /// The identity function `nu(u) = u`.
    pub fn identity() -> Self {
        Self::monomial(S::one(), 1).expect("positive coefficient")
    }

    pub fn constant(c: S) -> Result<Self> {
        Self::monomial(c, 0)
    }

    pub fn monomial(c: S, exponent: i32) -> Result<Self> {
        Self::from_terms([(c, exponent)])
    }

    /// Builds from `(coefficient, exponent)` pairs, merging equal exponents.
    pub fn from_terms(terms: impl IntoIterator<Item = (S, i32)>) -> Result<Self> {
        let mut out = Self::zero();
        for (c, n) in terms {
            if c.is_negative() {
                return Err(DsmError::param("coefficient", format!("{c:?} is negative")));
            }
            out.push(c, n);
        }
        Ok(out)
    }

    fn push(&mut self, c: S, n: i32) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(n).or_insert_with(S::zero);
        *slot = std::mem::replace(slot, S::zero()) + c;
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, &S)> {
        self.terms.iter().map(|(n, c)| (*n, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|&n| n == 0)
    }

    pub fn scale(&self, c: &S) -> Result<Self> {
        if c.is_negative() {
            return Err(DsmError::param("scale", format!("{c:?} is negative")));
        }
        let mut out = Self::zero();
        for (&n, a) in &self.terms {
            out.push(a.clone() * c.clone(), n);
        }
        Ok(out)
    }

    /// `p / nu`: every exponent lowered by one.
    pub fn div_by_nu(&self) -> Self {
        Posynomial {
            terms: self.terms.iter().map(|(n, c)| (n - 1, c.clone())).collect(),
        }
    }

    /// `p(u)`; `u` must be positive.
    pub fn eval(&self, u: &S) -> Result<S> {
        if !u.is_positive() {
            return Err(DsmError::Domain(format!(
                "posynomials are evaluated on positive reals, got {u:?}"
            )));
        }
        let inv = S::one() / u.clone();
        Ok(self.terms.iter().fold(S::zero(), |acc, (&n, c)| {
            let base = if n >= 0 { u.clone() } else { inv.clone() };
            acc + c.clone() * num_traits::pow(base, n.unsigned_abs() as usize)
        }))
    }
}

impl<S: Scalar> Add for &Posynomial<S> {
    type Output = Posynomial<S>;

    fn add(self, rhs: &Posynomial<S>) -> Posynomial<S> {
        let mut out = self.clone();
        for (&n, c) in &rhs.terms {
            out.push(c.clone(), n);
        }
        out
    }
}

impl<S: Scalar> Mul for &Posynomial<S> {
    type Output = Posynomial<S>;

    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: &Posynomial<S>) -> Posynomial<S> {
        let mut buckets: BTreeMap<i32, Vec<(&S, &S)>> = BTreeMap::new();
        for (&n, a) in &self.terms {
            for (&m, b) in &rhs.terms {
                buckets.entry(n + m).or_default().push((a, b));
            }
        }
        let mut out = Posynomial::zero();
        for (k, pairs) in buckets {
            out.push(S::sum_of_products(&pairs), k);
        }
        out
    }
}

impl<S: Scalar> fmt::Display for Posynomial<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (n, c)) in self.terms.iter().rev().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            match n {
                0 => write!(f, "{}", display_scalar(c))?,
                1 => write!(f, "{}*V", display_scalar(c))?,
                _ => write!(f, "{}*V^{}", display_scalar(c), n)?,
            }
        }
        Ok(())
    }
}

pub fn posy_add<S: Scalar>(p: &Posynomial<S>, q: &Posynomial<S>) -> Posynomial<S> {
    p + q
}

pub fn posy_mul<S: Scalar>(p: &Posynomial<S>, q: &Posynomial<S>) -> Posynomial<S> {
    p * q
}

pub fn posy_scale<S: Scalar>(c: &S, p: &Posynomial<S>) -> Result<Posynomial<S>> {
    p.scale(c)
}

pub fn posy_div_by_nu<S: Scalar>(p: &Posynomial<S>) -> Posynomial<S> {
    p.div_by_nu()
}

pub fn posy_eval<S: Scalar>(p: &Posynomial<S>, u: &S) -> Result<S> {
    p.eval(u)
}

/// `max(p(a), p(b))`, which bounds `p` on `[a, b]` by convexity.
pub fn endpoint_max<S: Scalar>(p: &Posynomial<S>, a: &S, b: &S) -> Result<S> {
    if !a.is_positive() {
        return Err(DsmError::param("interval", "left endpoint must be positive"));
    }
    if a > b {
        return Err(DsmError::param("interval", "left endpoint exceeds right endpoint"));
    }
    let pa = p.eval(a)?;
    let pb = p.eval(b)?;
    Ok(if pa >= pb { pa } else { pb })
}
