//! Generic digit serial method (DSM) machinery.
//!
//! A DSM produces integer digits `v_1, v_2, ...` of a target `V` in a mixed
//! radix `beta_1, beta_2, ...`. After `i` steps it holds the head `H_i` (the
//! accumulated estimate) and the tail `T_i = B_i (V - H_i)` where
//! `B_i = beta_1 ... beta_i`. Every digit is chosen by a digit selection
//! function (DSF) that rounds a real to a nearby integer; a DSF belongs to
//! `RNI(omega)` when its rounding error never exceeds `omega`.
//!
//! [`step_basic`] selects from the exact scaled tail; [`step_proxy`] selects
//! from a proxy `Tp_i = (1 + psi_i) T_i` supplied by a [`TailProxy`].

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::One;

use crate::error::{DsmError, Result};
use crate::numeric::{self, round_to_nearest_int, truncate_frac_bits, Scalar, TieRule};

/// Radices `beta_1..beta_n` (1-indexed) with their prefix products `B_0..B_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RadixSequence {
    betas: Vec<u64>,
    cumulative: Vec<BigInt>,
}

impl RadixSequence {
    pub fn new(betas: Vec<u64>) -> Result<Self> {
        if let Some(bad) = betas.iter().find(|&&b| b < 2) {
            return Err(DsmError::param("betas", format!("radix {bad} is below 2")));
        }
        let mut cumulative = Vec::with_capacity(betas.len() + 1);
        cumulative.push(BigInt::one());
        for &b in &betas {
            let next = cumulative.last().unwrap() * b;
            cumulative.push(next);
        }
        Ok(RadixSequence { betas, cumulative })
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn betas(&self) -> &[u64] {
        &self.betas
    }

    /// `beta_i` for `1 <= i <= len`.
    pub fn beta(&self, i: usize) -> u64 {
        assert!(i >= 1, "radices are 1-indexed");
        self.betas[i - 1]
    }

    /// `B_i` for `0 <= i <= len`.
    pub fn cumulative(&self, i: usize) -> &BigInt {
        &self.cumulative[i]
    }

    /// `log2(beta_i)` when `beta_i` is a power of two.
    pub fn radix_bits(&self, i: usize) -> Option<u32> {
        let b = self.beta(i);
        b.is_power_of_two().then(|| b.trailing_zeros())
    }

    pub fn all_powers_of_two(&self) -> bool {
        self.betas.iter().all(|b| b.is_power_of_two())
    }

    pub fn prefix(&self, n: usize) -> RadixSequence {
        RadixSequence {
            betas: self.betas[..n].to_vec(),
            cumulative: self.cumulative[..=n].to_vec(),
        }
    }
}

/// Which rule a [`DigitSelection`] implements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DsfKind {
    /// Exact round to nearest; `omega = 1/2`.
    ExactNearest(TieRule),
    /// Round to nearest after truncating to `frac_bits` fraction bits;
    /// `omega = 1/2 + 2^-frac_bits`.
    Truncating { frac_bits: u32, tie: TieRule },
    /// Smallest integer in `[z - omega, z + omega]`.
    LowBiased,
    /// Largest integer in `[z - omega, z + omega]`.
    HighBiased,
    /// Integer of largest magnitude in `[z - omega, z + omega]`.
    MaxMagnitude,
    Custom(String),
}

impl fmt::Display for DsfKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DsfKind::ExactNearest(_) => write!(f, "nearest"),
            DsfKind::Truncating { frac_bits, .. } => write!(f, "truncating({frac_bits})"),
            DsfKind::LowBiased => write!(f, "low"),
            DsfKind::HighBiased => write!(f, "high"),
            DsfKind::MaxMagnitude => write!(f, "max-magnitude"),
            DsfKind::Custom(name) => write!(f, "custom({name})"),
        }
    }
}

/// Family requested from [`make_dsf`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DsfFamily {
    ExactNearest,
    Truncating,
    LowBiased,
    HighBiased,
    MaxMagnitude,
}

impl std::str::FromStr for DsfFamily {
    type Err = DsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nearest" | "exact" | "exact-nearest" => Ok(DsfFamily::ExactNearest),
            "truncating" | "trunc" => Ok(DsfFamily::Truncating),
            "low" | "low-biased" => Ok(DsfFamily::LowBiased),
            "high" | "high-biased" => Ok(DsfFamily::HighBiased),
            "max" | "max-magnitude" => Ok(DsfFamily::MaxMagnitude),
            other => Err(DsmError::Parse(format!("unknown digit selection `{other}`"))),
        }
    }
}

type SelectFn<S> = Arc<dyn Fn(&S) -> BigInt + Send + Sync>;

/// A digit selection function together with its advertised `omega`.
///
/// The invariant `|z - select(z)| <= omega` holds for every `z`.
#[derive(Clone)]
pub struct DigitSelection<S> {
    omega: S,
    kind: DsfKind,
    select: SelectFn<S>,
}

impl<S: Scalar> DigitSelection<S> {
    /// Wraps an arbitrary selector. The caller vouches for `omega`.
    pub fn custom(
        name: impl Into<String>,
        omega: S,
        select: impl Fn(&S) -> BigInt + Send + Sync + 'static,
    ) -> Result<Self> {
        check_omega(&omega)?;
        Ok(DigitSelection {
            omega,
            kind: DsfKind::Custom(name.into()),
            select: Arc::new(select),
        })
    }

    pub fn exact_nearest(tie: TieRule) -> Self {
        DigitSelection {
            omega: S::half(),
            kind: DsfKind::ExactNearest(tie),
            select: Arc::new(move |z: &S| round_to_nearest_int(z, tie)),
        }
    }

    pub fn truncating(frac_bits: u32, tie: TieRule) -> Self {
        DigitSelection {
            omega: S::half() + numeric::pow2::<S>(-i64::from(frac_bits)),
            kind: DsfKind::Truncating { frac_bits, tie },
            select: Arc::new(move |z: &S| round_to_nearest_int(&truncate_frac_bits(z, frac_bits), tie)),
        }
    }

    pub fn low_biased(omega: S) -> Result<Self> {
        check_omega(&omega)?;
        let w = omega.clone();
        Ok(DigitSelection {
            omega,
            kind: DsfKind::LowBiased,
            select: Arc::new(move |z: &S| ceil_of(&(z.clone() - w.clone()))),
        })
    }

    pub fn high_biased(omega: S) -> Result<Self> {
        check_omega(&omega)?;
        let w = omega.clone();
        Ok(DigitSelection {
            omega,
            kind: DsfKind::HighBiased,
            select: Arc::new(move |z: &S| (z.clone() + w.clone()).floor_integer()),
        })
    }

    pub fn max_magnitude(omega: S) -> Result<Self> {
        check_omega(&omega)?;
        let w = omega.clone();
        Ok(DigitSelection {
            omega,
            kind: DsfKind::MaxMagnitude,
            select: Arc::new(move |z: &S| {
                let m = (z.abs() + w.clone()).floor_integer();
                if z.is_negative() {
                    -m
                } else {
                    m
                }
            }),
        })
    }

    pub fn omega(&self) -> &S {
        &self.omega
    }

    pub fn kind(&self) -> &DsfKind {
        &self.kind
    }

    pub fn select(&self, z: &S) -> BigInt {
        (self.select)(z)
    }

    /// `coDSF(z) = z - DSF(z)`.
    pub fn co_select(&self, z: &S) -> S {
        z.clone() - S::from_integer(&self.select(z))
    }
}

impl<S: fmt::Debug> fmt::Debug for DigitSelection<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DigitSelection")
            .field("kind", &self.kind)
            .field("omega", &self.omega)
            .finish()
    }
}

fn check_omega<S: Scalar>(omega: &S) -> Result<()> {
    if *omega < S::half() {
        return Err(DsmError::param("omega", "RNI(omega) is empty for omega < 1/2"));
    }
    Ok(())
}

fn ceil_of<S: Scalar>(z: &S) -> BigInt {
    -(-z.clone()).floor_integer()
}

/// Builds a DSF of the requested family whose `omega` does not exceed `budget`.
///
/// The truncating family picks the fewest fraction bits `f` with
/// `1/2 + 2^-f <= budget`; the biased families use `budget` itself.
pub fn make_dsf<S: Scalar>(family: DsfFamily, budget: &S, tie: TieRule) -> Result<DigitSelection<S>> {
    check_omega(budget)?;
    match family {
        DsfFamily::ExactNearest => Ok(DigitSelection::exact_nearest(tie)),
        DsfFamily::Truncating => {
            let slack = budget.clone() - S::half();
            if slack.is_zero() {
                return Err(DsmError::param(
                    "omega",
                    "a truncating selector needs omega strictly above 1/2",
                ));
            }
            let mut f = 0u32;
            while numeric::pow2::<S>(-i64::from(f)) > slack {
                f += 1;
                if f > 4096 {
                    return Err(DsmError::param("omega", "budget too close to 1/2"));
                }
            }
            Ok(DigitSelection::truncating(f, tie))
        }
        DsfFamily::LowBiased => DigitSelection::low_biased(budget.clone()),
        DsfFamily::HighBiased => DigitSelection::high_biased(budget.clone()),
        DsfFamily::MaxMagnitude => DigitSelection::max_magnitude(budget.clone()),
    }
}

/// Nearest selection for `omega == 1/2`, otherwise the truncating selector.
pub fn default_dsf<S: Scalar>(budget: &S) -> Result<DigitSelection<S>> {
    if *budget == S::half() {
        make_dsf(DsfFamily::ExactNearest, budget, TieRule::HalfEven)
    } else {
        make_dsf(DsfFamily::Truncating, budget, TieRule::HalfEven)
    }
}

/// `floor(z_bound + omega)`: bounds `|DSF(z)|` for `|z| <= z_bound`, `DSF in RNI(omega)`.
pub fn digit_bound<S: Scalar>(z_bound: &S, omega: &S) -> BigInt {
    (z_bound.clone() + omega.clone()).floor_integer()
}

/// Radices plus one digit selector per step.
#[derive(Clone, Debug)]
pub struct DsmConfig<S> {
    radices: RadixSequence,
    selectors: Vec<DigitSelection<S>>,
}

impl<S: Scalar> DsmConfig<S> {
    pub fn new(radices: RadixSequence, selectors: Vec<DigitSelection<S>>) -> Result<Self> {
        if radices.len() != selectors.len() {
            return Err(DsmError::param(
                "omegas",
                format!(
                    "{} selectors given for {} radices",
                    selectors.len(),
                    radices.len()
                ),
            ));
        }
        Ok(DsmConfig { radices, selectors })
    }

    pub fn uniform(radices: RadixSequence, dsf: DigitSelection<S>) -> Self {
        let selectors = vec![dsf; radices.len()];
        DsmConfig { radices, selectors }
    }

    pub fn radices(&self) -> &RadixSequence {
        &self.radices
    }

    /// Selector for step `i` (1-indexed, producing `v_i`).
    pub fn selector(&self, i: usize) -> &DigitSelection<S> {
        &self.selectors[i - 1]
    }

    pub fn omegas(&self) -> Vec<S> {
        self.selectors.iter().map(|d| d.omega().clone()).collect()
    }

    pub fn steps(&self) -> usize {
        self.radices.len()
    }

    pub fn with_selectors(&self, selectors: Vec<DigitSelection<S>>) -> Result<Self> {
        DsmConfig::new(self.radices.clone(), selectors)
    }

    pub(crate) fn ensure_steps(&self, steps: usize) -> Result<()> {
        if steps > self.steps() {
            return Err(DsmError::ConfigTooShort {
                available: self.steps(),
                requested: steps,
            });
        }
        Ok(())
    }
}

/// State after `index` steps.
#[derive(Clone, Debug, PartialEq)]
pub struct DsmState<S> {
    pub index: usize,
    pub cumulative: BigInt,
    pub head: S,
    pub tail: S,
    /// `v_index`; `None` for the initial state.
    pub digit: Option<BigInt>,
    /// Proxy `Tp_index` used to select the following digit (proxy mode only).
    pub proxy: Option<S>,
}

impl<S: Scalar> DsmState<S> {
    pub fn initial(v: &S) -> Self {
        DsmState {
            index: 0,
            cumulative: BigInt::one(),
            head: S::zero(),
            tail: v.clone(),
            digit: None,
            proxy: None,
        }
    }

    /// `H_i + T_i / B_i`, equal to `V` when the loop invariant holds.
    pub fn reconstruct(&self) -> S {
        self.head.clone() + self.tail.clone() / S::from_integer(&self.cumulative)
    }
}

fn advance<S: Scalar>(state: &DsmState<S>, beta: u64, digit: BigInt) -> DsmState<S> {
    let beta_s = S::from_integer(&BigInt::from(beta));
    let cumulative = &state.cumulative * beta;
    let v = S::from_integer(&digit);
    DsmState {
        index: state.index + 1,
        head: state.head.clone() + v.clone() / S::from_integer(&cumulative),
        tail: beta_s * state.tail.clone() - v,
        cumulative,
        digit: Some(digit),
        proxy: None,
    }
}

/// One step of the basic method: `v = DSF(beta * T)`.
pub fn step_basic<S: Scalar>(state: &DsmState<S>, beta: u64, dsf: &DigitSelection<S>) -> DsmState<S> {
    let z = S::from_integer(&BigInt::from(beta)) * state.tail.clone();
    advance(state, beta, dsf.select(&z))
}

/// Supplies the proxy `Tp_i` for the current tail.
pub trait TailProxy<S> {
    fn tail_proxy(&self, target: &S, state: &DsmState<S>) -> S;
}

impl<S, F> TailProxy<S> for F
where
    F: Fn(&S, &DsmState<S>) -> S,
{
    fn tail_proxy(&self, target: &S, state: &DsmState<S>) -> S {
        self(target, state)
    }
}

/// `Tp_i = (1 + psi(i, V, T_i)) T_i`.
pub struct RelativeErrorProxy<F>(pub F);

impl<S: Scalar, F: Fn(usize, &S, &S) -> S> TailProxy<S> for RelativeErrorProxy<F> {
    fn tail_proxy(&self, target: &S, state: &DsmState<S>) -> S {
        (S::one() + (self.0)(state.index, target, &state.tail)) * state.tail.clone()
    }
}

/// The exact proxy `Tp_i = T_i`.
pub struct ExactProxy;

impl<S: Scalar> TailProxy<S> for ExactProxy {
    fn tail_proxy(&self, _target: &S, state: &DsmState<S>) -> S {
        state.tail.clone()
    }
}

/// One step of the proxy method: returns `Tp_i` and the next state.
pub fn step_proxy<S: Scalar>(
    state: &DsmState<S>,
    beta: u64,
    dsf: &DigitSelection<S>,
    proxy: &dyn TailProxy<S>,
    target: &S,
) -> (S, DsmState<S>) {
    let tp = proxy.tail_proxy(target, state);
    let z = S::from_integer(&BigInt::from(beta)) * tp.clone();
    (tp, advance(state, beta, dsf.select(&z)))
}

pub enum RunMode<'a, S> {
    Basic,
    Proxy(&'a dyn TailProxy<S>),
}

/// Ordered states `0..=steps` of one run.
#[derive(Clone, Debug)]
pub struct DsmTrace<S> {
    pub radices: RadixSequence,
    pub omegas: Vec<S>,
    pub states: Vec<DsmState<S>>,
}

impl<S: Scalar> DsmTrace<S> {
    pub fn last(&self) -> &DsmState<S> {
        self.states.last().expect("trace has an initial state")
    }

    pub fn digits(&self) -> Vec<BigInt> {
        self.states.iter().filter_map(|s| s.digit.clone()).collect()
    }

    /// CSV with columns `i,B,H,v,T,Tp`; rationals as `p/q`, absent values empty.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["i", "B", "H", "v", "T", "Tp"]).unwrap();
        for s in &self.states {
            w.write_record([
                s.index.to_string(),
                s.cumulative.to_string(),
                numeric::display_scalar(&s.head).to_string(),
                s.digit.as_ref().map(|d| d.to_string()).unwrap_or_default(),
                numeric::display_scalar(&s.tail).to_string(),
                s.proxy
                    .as_ref()
                    .map(|p| numeric::display_scalar(p).to_string())
                    .unwrap_or_default(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// Runs `steps` steps of the basic or proxy method for target `v`.
///
/// Over exact scalars the invariant `V = H_i + T_i / B_i` is checked at every
/// state and a violation is reported as an error.
pub fn run<S: Scalar>(v: &S, config: &DsmConfig<S>, steps: usize, mode: RunMode<'_, S>) -> Result<DsmTrace<S>> {
    config.ensure_steps(steps)?;
    if matches!(mode, RunMode::Proxy(_)) && v.is_negative() {
        return Err(DsmError::Domain("proxy mode requires V >= 0".into()));
    }
    let mut states = Vec::with_capacity(steps + 1);
    let mut state = DsmState::initial(v);
    for i in 1..=steps {
        let beta = config.radices().beta(i);
        let dsf = config.selector(i);
        let next = match mode {
            RunMode::Basic => step_basic(&state, beta, dsf),
            RunMode::Proxy(proxy) => {
                let (tp, next) = step_proxy(&state, beta, dsf, proxy, v);
                state.proxy = Some(tp);
                next
            }
        };
        states.push(std::mem::replace(&mut state, next));
    }
    if let RunMode::Proxy(proxy) = mode {
        state.proxy = Some(proxy.tail_proxy(v, &state));
    }
    states.push(state);
    if S::is_exact() {
        for s in &states {
            if s.reconstruct() != *v {
                return Err(DsmError::Invariant {
                    step: s.index,
                    what: "V != H + T/B".into(),
                });
            }
        }
    }
    Ok(DsmTrace {
        radices: config.radices().prefix(steps),
        omegas: config.omegas()[..steps].to_vec(),
        states,
    })
}

/// Digit bounds of the basic method: `floor(beta_1 |V| + omega_1)` for the first
/// digit and `floor(beta_i omega_{i-1} + omega_i)` afterwards.
pub fn basic_digit_bounds<S: Scalar>(v: &S, config: &DsmConfig<S>, steps: usize) -> Vec<BigInt> {
    (1..=steps)
        .map(|i| {
            let beta = S::from_integer(&BigInt::from(config.radices().beta(i)));
            let prev = if i == 1 {
                v.abs()
            } else {
                config.selector(i - 1).omega().clone()
            };
            digit_bound(&(beta * prev), config.selector(i).omega())
        })
        .collect()
}
