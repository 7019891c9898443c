//! Division and square root by digit recurrence on exact partial remainders.
//!
//! The tail is never formed explicitly. Division keeps `R_i = Y T_i` and
//! selects from `Tp_i = g(Y) R_i`; square root keeps `R_i = T_i (V + H_i) / 2`
//! and selects from `Tp_i = mu_i g(X) R_i` with `mu_0 = 2`, `mu_i = 1` after.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::engine::DsmConfig;
use crate::error::{DsmError, Result};
use crate::numeric::{
    format_rational, isqrt, parse_rational, pow2, round_to_nearest_int, sqrt_bracket, Rational,
    TieRule,
};

/// Which algorithm a run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operation {
    Div,
    DivPrescaled,
    Sqrt,
}

impl Operation {
    pub fn proxy_kind(self) -> crate::bounds::ProxyKind {
        match self {
            Operation::Div | Operation::DivPrescaled => crate::bounds::ProxyKind::Division,
            Operation::Sqrt => crate::bounds::ProxyKind::SquareRoot,
        }
    }

    pub fn recip_kind(self) -> RecipKind {
        match self {
            Operation::Div | Operation::DivPrescaled => RecipKind::Reciprocal,
            Operation::Sqrt => RecipKind::RecipSqrt,
        }
    }
}

impl FromStr for Operation {
    type Err = DsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "div" | "division" => Ok(Operation::Div),
            "div-prescaled" | "prescaled" => Ok(Operation::DivPrescaled),
            "sqrt" | "square-root" => Ok(Operation::Sqrt),
            other => Err(DsmError::Parse(format!("unknown operation `{other}`"))),
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operation::Div => "div",
            Operation::DivPrescaled => "div-prescaled",
            Operation::Sqrt => "sqrt",
        })
    }
}

/// A positive binary floating-point value `(1 + f / 2^k) 2^e`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FloatLikeInput {
    frac: BigInt,
    k: u32,
    exp: i64,
}

impl FloatLikeInput {
    pub fn new(frac: impl Into<BigInt>, k: u32, exp: i64) -> Result<Self> {
        let frac = frac.into();
        if k == 0 {
            return Err(DsmError::param("k", "precision must be positive"));
        }
        if frac.is_negative() || frac >= (BigInt::one() << k) {
            return Err(DsmError::param("f", format!("need 0 <= f < 2^{k}, got {frac}")));
        }
        Ok(FloatLikeInput { frac, k, exp })
    }

    /// Normalizes a positive rational with a terminating binary expansion.
    pub fn from_rational(q: &Rational) -> Result<Self> {
        if !q.is_positive() {
            return Err(DsmError::Domain(format!("{q} is not positive")));
        }
        let den = q.denom();
        if !(den & (den - BigInt::one())).is_zero() {
            return Err(DsmError::Domain(format!("{q} is not a dyadic rational")));
        }
        let num = q.numer();
        let den_bits = den.bits() as i64 - 1;
        let top = num.bits() as i64 - 1;
        let exp = top - den_bits;
        let k = (top as u32).max(1);
        let frac = num - (BigInt::one() << top as usize);
        let frac = if top == 0 { frac } else { frac << (k - top as u32) as usize };
        Self::new(frac, k, exp)
    }

    pub fn frac(&self) -> &BigInt {
        &self.frac
    }

    pub fn precision(&self) -> u32 {
        self.k
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    /// `s = 1 + f / 2^k` in `[1, 2)`.
    pub fn significand(&self) -> Rational {
        Rational::one() + Rational::new(self.frac.clone(), BigInt::one() << self.k)
    }

    pub fn value(&self) -> Rational {
        self.significand() * pow2::<Rational>(self.exp)
    }
}

impl FromStr for FloatLikeInput {
    type Err = DsmError;

    /// `"f,k,e"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [f, k, e] = parts[..] else {
            return Err(DsmError::Parse(format!("expected `f,k,e`, got `{s}`")));
        };
        let f: BigInt = f.parse().map_err(|_| DsmError::Parse(format!("bad fraction `{f}`")))?;
        let k: u32 = k.parse().map_err(|_| DsmError::Parse(format!("bad precision `{k}`")))?;
        let e: i64 = e.parse().map_err(|_| DsmError::Parse(format!("bad exponent `{e}`")))?;
        Self::new(f, k, e)
    }
}

/// Scaled division operands: `x / y = (X / Y) 2^exponent`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledDiv {
    pub x: Rational,
    pub y: Rational,
    pub exponent: i64,
}

/// Scaled square-root operand: `sqrt(x) = sqrt(X) 2^exponent`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledSqrt {
    pub x: Rational,
    pub exponent: i64,
}

pub fn scale_div(x: &FloatLikeInput, y: &FloatLikeInput) -> ScaledDiv {
    ScaledDiv {
        x: x.significand() / Rational::from_integer(2.into()),
        y: y.significand(),
        exponent: x.exp - y.exp + 1,
    }
}

pub fn scale_sqrt(x: &FloatLikeInput) -> ScaledSqrt {
    let s = x.significand();
    if x.exp.is_even() {
        ScaledSqrt {
            x: s / Rational::from_integer(4.into()),
            exponent: (x.exp + 2) / 2,
        }
    } else {
        ScaledSqrt {
            x: s / Rational::from_integer(2.into()),
            exponent: (x.exp + 1) / 2,
        }
    }
}

/// `h 2^exponent`.
pub fn unscale(h: &Rational, exponent: i64) -> Rational {
    h * pow2::<Rational>(exponent)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RecipKind {
    /// `g(Y) ~ 1/Y` on `[1, 2)`.
    Reciprocal,
    /// `g(X) ~ 1/sqrt(X)` on `[1/4, 1)`.
    RecipSqrt,
}

/// Round-to-nearest fixed-point approximation with `frac_bits` fraction bits.
///
/// Reciprocal: `|g Y - 1| <= Y 2^-(k+1) < 2^-k`.
/// Reciprocal square root: `|g sqrt(X) - 1| <= sqrt(X) 2^-(k+1) < 2^-(k+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RecipApprox {
    kind: RecipKind,
    frac_bits: u32,
    sigma_bound: Rational,
}

/// Smallest `k` whose guaranteed relative error fits in `sigma_budget`.
pub fn make_recip(kind: RecipKind, sigma_budget: &Rational) -> Result<RecipApprox> {
    if !sigma_budget.is_positive() {
        return Err(DsmError::param("sigma", "reciprocal approximation needs sigma > 0"));
    }
    let slack = match kind {
        RecipKind::Reciprocal => 0,
        RecipKind::RecipSqrt => 1,
    };
    let mut k: u32 = 0;
    while pow2::<Rational>(-i64::from(k + slack)) > *sigma_budget {
        k += 1;
    }
    Ok(RecipApprox {
        kind,
        frac_bits: k,
        sigma_bound: pow2(-i64::from(k + slack)),
    })
}

impl RecipApprox {
    pub fn kind(&self) -> RecipKind {
        self.kind
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// Proven bound on `|sigma|`.
    pub fn sigma_bound(&self) -> &Rational {
        &self.sigma_bound
    }

    fn check_domain(&self, arg: &Rational) -> Result<()> {
        let ok = match self.kind {
            RecipKind::Reciprocal => *arg >= Rational::one() && *arg < Rational::from_integer(2.into()),
            RecipKind::RecipSqrt => *arg >= Rational::new(1.into(), 4.into()) && *arg < Rational::one(),
        };
        if ok {
            Ok(())
        } else {
            let range = match self.kind {
                RecipKind::Reciprocal => "[1, 2)",
                RecipKind::RecipSqrt => "[1/4, 1)",
            };
            Err(DsmError::Domain(format!("{arg} outside {range}")))
        }
    }

    pub fn apply(&self, arg: &Rational) -> Result<Rational> {
        self.check_domain(arg)?;
        let scale = BigInt::one() << self.frac_bits;
        let m = match self.kind {
            RecipKind::Reciprocal => {
                round_to_nearest_int(&(Rational::from_integer(scale.clone()) / arg), TieRule::HalfEven)
            }
            RecipKind::RecipSqrt => {
                // r = 2^k / sqrt(arg); floor(r) = isqrt(floor(r^2))
                let r2 = Rational::from_integer(&scale * &scale) / arg;
                let fl = isqrt(&r2.to_integer())?;
                let mid = Rational::from_integer(fl.clone()) + Rational::new(1.into(), 2.into());
                if r2 >= &mid * &mid {
                    fl + 1
                } else {
                    fl
                }
            }
        };
        Ok(Rational::new(m, scale))
    }

    /// `sigma(Y) = g(Y) Y - 1` (reciprocal only; exact).
    pub fn sigma(&self, y: &Rational) -> Result<Rational> {
        if self.kind != RecipKind::Reciprocal {
            return Err(DsmError::param("kind", "sigma is irrational for the square-root approximation"));
        }
        Ok(self.apply(y)? * y - Rational::one())
    }
}

/// `sqrt(X)`, either exact or enclosed in `[lo, hi]` with `hi - lo = 2^-bits`.
#[derive(Clone, Debug, PartialEq)]
pub struct RootBracket {
    x: Rational,
    pub lo: Rational,
    pub hi: Rational,
    pub exact: bool,
    pub bits: u32,
}

impl RootBracket {
    pub fn new(x: &Rational, bits: u32) -> Result<Self> {
        if let Some(r) = exact_sqrt(x) {
            return Ok(RootBracket {
                x: x.clone(),
                lo: r.clone(),
                hi: r,
                exact: true,
                bits,
            });
        }
        let (lo, hi) = sqrt_bracket(x, bits)?;
        Ok(RootBracket {
            x: x.clone(),
            lo,
            hi,
            exact: false,
            bits,
        })
    }

    /// The same bracket at twice the precision.
    pub fn refine(&self) -> Result<Self> {
        if self.exact {
            return Ok(self.clone());
        }
        Self::new(&self.x, self.bits * 2)
    }

    /// Enclosure of `T_i = B_i (V - H_i)`.
    pub fn tail(&self, state: &RemainderState) -> (Rational, Rational) {
        let b = Rational::from_integer(state.cumulative.clone());
        (&b * (&self.lo - &state.head), &b * (&self.hi - &state.head))
    }
}

/// `sqrt(q)` when it is rational.
pub fn exact_sqrt(q: &Rational) -> Option<Rational> {
    if q.is_negative() {
        return None;
    }
    let n = isqrt(q.numer()).ok()?;
    let d = isqrt(q.denom()).ok()?;
    (&n * &n == *q.numer() && &d * &d == *q.denom()).then(|| Rational::new(n, d))
}

/// State after `index` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct RemainderState {
    pub index: usize,
    pub cumulative: BigInt,
    pub head: Rational,
    pub remainder: Rational,
    /// `v_index`; `None` for the initial state.
    pub digit: Option<BigInt>,
    /// `Tp_index`, the proxy the next digit is selected from.
    pub proxy: Rational,
}

#[derive(Clone, Debug)]
pub struct RemainderTrace {
    pub op: Operation,
    /// Operands as run (`g(Y) X`, `g(Y) Y` for prescaled division).
    pub x: Rational,
    pub y: Option<Rational>,
    pub g: Rational,
    pub states: Vec<RemainderState>,
}

impl RemainderTrace {
    pub fn last(&self) -> &RemainderState {
        self.states.last().expect("trace has an initial state")
    }

    pub fn digits(&self) -> Vec<BigInt> {
        self.states.iter().filter_map(|s| s.digit.clone()).collect()
    }

    /// CSV with columns `i,B,H,v,R,Tp`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["i", "B", "H", "v", "R", "Tp"]).unwrap();
        for s in &self.states {
            w.write_record([
                s.index.to_string(),
                s.cumulative.to_string(),
                format_rational(&s.head),
                s.digit.as_ref().map(|d| d.to_string()).unwrap_or_default(),
                format_rational(&s.remainder),
                format_rational(&s.proxy),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    /// Parses the output of [`RemainderTrace::to_csv`] back into states.
    pub fn states_from_csv(text: &str) -> Result<Vec<RemainderState>> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let mut out = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| DsmError::Parse(e.to_string()))?;
            let int = |s: &str| -> Result<BigInt> {
                s.parse().map_err(|_| DsmError::Parse(format!("bad integer `{s}`")))
            };
            out.push(RemainderState {
                index: rec[0].parse().map_err(|_| DsmError::Parse(format!("bad index `{}`", &rec[0])))?,
                cumulative: int(&rec[1])?,
                head: parse_rational(&rec[2])?,
                digit: if rec[3].is_empty() { None } else { Some(int(&rec[3])?) },
                remainder: parse_rational(&rec[4])?,
                proxy: parse_rational(&rec[5])?,
            });
        }
        Ok(out)
    }
}

fn check_div_domain(x: &Rational, y: &Rational) -> Result<()> {
    let half = Rational::new(1.into(), 2.into());
    if *x < half || *x >= Rational::one() {
        return Err(DsmError::Domain(format!("X = {x} outside [1/2, 1)")));
    }
    if *y < Rational::one() || *y >= Rational::from_integer(2.into()) {
        return Err(DsmError::Domain(format!("Y = {y} outside [1, 2)")));
    }
    Ok(())
}

fn check_sqrt_domain(x: &Rational) -> Result<()> {
    if *x < Rational::new(1.into(), 4.into()) || *x >= Rational::one() {
        return Err(DsmError::Domain(format!("X = {x} outside [1/4, 1)")));
    }
    Ok(())
}

fn check_kind(g: &RecipApprox, kind: RecipKind) -> Result<()> {
    if g.kind != kind {
        return Err(DsmError::param("g", format!("expected a {kind:?} approximation")));
    }
    Ok(())
}

fn initial(remainder: Rational, proxy: Rational) -> RemainderState {
    RemainderState {
        index: 0,
        cumulative: BigInt::one(),
        head: Rational::zero(),
        remainder,
        digit: None,
        proxy,
    }
}

fn invariant(step: usize, what: &str) -> DsmError {
    DsmError::Invariant {
        step,
        what: what.into(),
    }
}

/// Division with `Tp_i = g(Y) R_i`; checks `X = H_i Y + R_i / B_i` at every step.
pub fn run_div(
    x: &Rational,
    y: &Rational,
    config: &DsmConfig<Rational>,
    g: &RecipApprox,
    steps: usize,
) -> Result<RemainderTrace> {
    check_kind(g, RecipKind::Reciprocal)?;
    run_div_with_g(x, y, config, &g.apply(y)?, steps)
}

/// [`run_div`] with an explicit `g(Y)`, e.g. one realizing a chosen `sigma(Y)`.
pub fn run_div_with_g(
    x: &Rational,
    y: &Rational,
    config: &DsmConfig<Rational>,
    gy: &Rational,
    steps: usize,
) -> Result<RemainderTrace> {
    check_div_domain(x, y)?;
    config.ensure_steps(steps)?;
    let gy = gy.clone();
    let mut states = vec![initial(x.clone(), &gy * x)];
    for i in 1..=steps {
        let prev = &states[i - 1];
        let beta = config.radices().beta(i);
        let beta_q = Rational::from_integer(beta.into());
        let v = config.selector(i).select(&(&beta_q * &prev.proxy));
        let cumulative = &prev.cumulative * beta;
        let vq = Rational::from_integer(v.clone());
        let remainder = &beta_q * &prev.remainder - &vq * y;
        let head = &prev.head + &vq / Rational::from_integer(cumulative.clone());
        let next = RemainderState {
            index: i,
            proxy: &gy * &remainder,
            cumulative,
            head,
            remainder,
            digit: Some(v),
        };
        if &next.head * y + &next.remainder / Rational::from_integer(next.cumulative.clone()) != *x {
            return Err(invariant(i, "X != H Y + R/B"));
        }
        states.push(next);
    }
    Ok(RemainderTrace {
        op: Operation::Div,
        x: x.clone(),
        y: Some(y.clone()),
        g: gy,
        states,
    })
}

/// Division on prescaled operands `X' = g(Y) X`, `Y' = g(Y) Y`: the loop only
/// shifts, subtracts and multiplies by the short `sigma(Y) = Y' - 1`.
/// Checks `X' = H_i Y' + R'_i / B_i` at every step.
pub fn run_div_prescaled(
    x: &Rational,
    y: &Rational,
    config: &DsmConfig<Rational>,
    g: &RecipApprox,
    steps: usize,
) -> Result<RemainderTrace> {
    check_div_domain(x, y)?;
    check_kind(g, RecipKind::Reciprocal)?;
    config.ensure_steps(steps)?;
    let gy = g.apply(y)?;
    let xp = &gy * x;
    let yp = &gy * y;
    let sigma = &yp - Rational::one();
    let mut states = vec![initial(xp.clone(), xp.clone())];
    for i in 1..=steps {
        let prev = &states[i - 1];
        let beta = config.radices().beta(i);
        let beta_q = Rational::from_integer(beta.into());
        let v = config.selector(i).select(&(&beta_q * &prev.remainder));
        let cumulative = &prev.cumulative * beta;
        let vq = Rational::from_integer(v.clone());
        let remainder = (&beta_q * &prev.remainder - &vq) - &vq * &sigma;
        let head = &prev.head + &vq / Rational::from_integer(cumulative.clone());
        let next = RemainderState {
            index: i,
            proxy: remainder.clone(),
            cumulative,
            head,
            remainder,
            digit: Some(v),
        };
        if &next.head * &yp + &next.remainder / Rational::from_integer(next.cumulative.clone()) != xp {
            return Err(invariant(i, "X' != H Y' + R'/B"));
        }
        states.push(next);
    }
    Ok(RemainderTrace {
        op: Operation::DivPrescaled,
        x: xp,
        y: Some(yp),
        g: gy,
        states,
    })
}

/// Square root with `Tp_i = mu_i g(X) R_i`; checks `X = H_i^2 + 2 R_i / B_i`
/// and `V + H_i > 0` at every step.
pub fn run_sqrt(x: &Rational, config: &DsmConfig<Rational>, g: &RecipApprox, steps: usize) -> Result<RemainderTrace> {
    check_kind(g, RecipKind::RecipSqrt)?;
    run_sqrt_with_g(x, config, &g.apply(x)?, steps)
}

/// [`run_sqrt`] with an explicit `g(X)`.
pub fn run_sqrt_with_g(x: &Rational, config: &DsmConfig<Rational>, gx: &Rational, steps: usize) -> Result<RemainderTrace> {
    check_sqrt_domain(x)?;
    config.ensure_steps(steps)?;
    let gx = gx.clone();
    let root_lo = sqrt_bracket(x, 64)?.0;
    let two = Rational::from_integer(2.into());
    let r0 = x / &two;
    let mut states = vec![initial(r0.clone(), &two * &gx * &r0)];
    for i in 1..=steps {
        let prev = &states[i - 1];
        let beta = config.radices().beta(i);
        let beta_q = Rational::from_integer(beta.into());
        let v = config.selector(i).select(&(&beta_q * &prev.proxy));
        let cumulative = &prev.cumulative * beta;
        let vq = Rational::from_integer(v.clone());
        let head = &prev.head + &vq / Rational::from_integer(cumulative.clone());
        let remainder = &beta_q * &prev.remainder - &vq * (&head + &prev.head) / &two;
        let next = RemainderState {
            index: i,
            proxy: &gx * &remainder,
            cumulative,
            head,
            remainder,
            digit: Some(v),
        };
        if &next.head * &next.head + &two * &next.remainder / Rational::from_integer(next.cumulative.clone()) != *x {
            return Err(invariant(i, "X != H^2 + 2R/B"));
        }
        if !(&root_lo + &next.head).is_positive() {
            return Err(invariant(i, "V + H is not positive"));
        }
        states.push(next);
    }
    Ok(RemainderTrace {
        op: Operation::Sqrt,
        x: x.clone(),
        y: None,
        g: gx,
        states,
    })
}

/// Dispatches on `op`; `y` is required for division.
pub fn run_op(
    op: Operation,
    x: &Rational,
    y: Option<&Rational>,
    config: &DsmConfig<Rational>,
    g: &RecipApprox,
    steps: usize,
) -> Result<RemainderTrace> {
    let need_y = || y.ok_or_else(|| DsmError::param("y", "division needs a divisor"));
    match op {
        Operation::Div => run_div(x, need_y()?, config, g, steps),
        Operation::DivPrescaled => run_div_prescaled(x, need_y()?, config, g, steps),
        Operation::Sqrt => run_sqrt(x, config, g, steps),
    }
}

/// `Tp_i = (1 + sigma(Y)) R_i / Y` for every state of a plain division trace.
pub fn check_div_proxy(trace: &RemainderTrace) -> Result<()> {
    let y = trace.y.as_ref().ok_or_else(|| DsmError::param("trace", "not a division trace"))?;
    let sigma = &trace.g * y - Rational::one();
    for s in &trace.states {
        let t = &s.remainder / y;
        let expected = match trace.op {
            Operation::Div => (Rational::one() + &sigma) * &t,
            // R' = g(Y) R, so R' = (1 + sigma) T as well
            Operation::DivPrescaled => s.remainder.clone(),
            Operation::Sqrt => unreachable!("checked above"),
        };
        if s.proxy != expected {
            return Err(invariant(s.index, "Tp != (1 + sigma) R / Y"));
        }
    }
    Ok(())
}

/// Checks `|Tp_i - T_i| <= Psi_i(V, |T_i|) |T_i|` for a square-root trace, with
/// `Psi_0 = S` and `Psi_i = S + (1 + S) |T_i| / (2 V B_i)`, `S = sigma_bound`.
///
/// `V` is enclosed by integer square roots; the bracket is refined from
/// `start_bits` until the inequality is decided or `max_bits` is exceeded.
pub fn check_sqrt_psi(trace: &RemainderTrace, sigma_bound: &Rational, start_bits: u32, max_bits: u32) -> Result<()> {
    if trace.op != Operation::Sqrt {
        return Err(DsmError::param("trace", "not a square-root trace"));
    }
    let mut root = RootBracket::new(&trace.x, start_bits)?;
    for s in &trace.states {
        loop {
            match psi_holds(&root, s, sigma_bound) {
                Some(true) => break,
                Some(false) => return Err(invariant(s.index, "|psi| exceeds its bound")),
                None if root.bits < max_bits => root = root.refine()?,
                None => return Err(invariant(s.index, "psi bound undecided at maximum precision")),
            }
        }
    }
    Ok(())
}

/// `Some(true)` if the bound holds for every `V` in the bracket,
/// `Some(false)` if it fails for every `V`, `None` otherwise.
fn psi_holds(root: &RootBracket, s: &RemainderState, sigma: &Rational) -> Option<bool> {
    let (tlo, thi) = root.tail(s);
    let tp = &s.proxy;
    let b = Rational::from_integer(s.cumulative.clone());
    let two = Rational::from_integer(2.into());
    let abs_min = |lo: &Rational, hi: &Rational| {
        if lo.is_positive() {
            lo.clone()
        } else if hi.is_negative() {
            -hi.clone()
        } else {
            Rational::zero()
        }
    };
    let psi_times = |t_abs: &Rational, v: &Rational| -> Rational {
        if s.index == 0 {
            sigma * t_abs
        } else {
            sigma * t_abs + (Rational::one() + sigma) * t_abs * t_abs / (&two * v * &b)
        }
    };
    let err_max = (tp - &tlo).abs().max((tp - &thi).abs());
    let err_min = abs_min(&(tp - &thi), &(tp - &tlo));
    let rhs_min = psi_times(&abs_min(&tlo, &thi), &root.hi);
    let rhs_max = psi_times(&tlo.abs().max(thi.abs()), &root.lo);
    if err_max <= rhs_min {
        Some(true)
    } else if err_min > rhs_max {
        Some(false)
    } else {
        None
    }
}
