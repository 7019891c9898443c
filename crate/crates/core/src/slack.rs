//! Adversarial search for inputs that push `|v_i|` towards its certified bound.
//!
//! A candidate fixes the operands on a dyadic grid, an admissible reciprocal
//! approximation (any `g` with `|sigma| <= sigma`, not just the rounded one),
//! and a low- or high-biased selector for every step before the target. The
//! target digit itself uses the max-magnitude selector. Search is random
//! multistart followed by greedy coordinate moves on the continuous score
//! `|beta_i Tp_{i-1}|`, ties broken towards the lexicographically smallest input.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::divsqrt::{run_div_with_g, run_sqrt_with_g, Operation, RemainderTrace};
use crate::engine::{DigitSelection, DsmConfig};
use crate::error::{DsmError, Result};
use crate::numeric::{format_rational, sqrt_bracket, Rational};
use crate::problem::ProblemSpec;
use crate::verify::sample_rng;

/// Resolution of the `sigma` / `g` coordinate.
const PERTURB_BITS: u32 = 16;
const RESTART_EVALS: usize = 250;

#[derive(Clone, Debug)]
pub struct SlackOptions {
    pub budget: usize,
    pub seed: u64,
    pub grid_bits: u32,
}

impl Default for SlackOptions {
    fn default() -> Self {
        SlackOptions {
            budget: 10_000,
            seed: 0,
            grid_bits: 24,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Candidate {
    x: BigInt,
    y: Option<BigInt>,
    /// In `[-2^PERTURB_BITS, 2^PERTURB_BITS]`.
    perturb: i64,
    /// Bit `j` set: high-biased selector for step `j + 1`.
    bias: u64,
}

#[derive(Clone, Debug)]
struct Evaluation {
    achieved: BigInt,
    score: Rational,
    trace: RemainderTrace,
    unsound: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlackReport {
    pub op: Operation,
    pub target: usize,
    pub x: Rational,
    pub y: Option<Rational>,
    /// The `g(Y)` or `g(X)` of the best candidate.
    pub g: Rational,
    pub selectors: Vec<String>,
    pub digits: Vec<BigInt>,
    pub achieved: BigInt,
    pub v_max: BigInt,
    pub ratio: Rational,
    pub evaluations: usize,
    /// Evaluations where some digit exceeded its certified bound.
    pub violations: usize,
    pub first_violation: Option<String>,
}

impl SlackReport {
    pub fn ratio_f64(&self) -> f64 {
        self.ratio.to_f64().unwrap_or(f64::NAN)
    }

    pub fn slack(&self) -> BigInt {
        &self.v_max - &self.achieved
    }

    pub fn sound(&self) -> bool {
        self.violations == 0
    }

    pub const CSV_HEADER: &'static str = "op,i,x,y,g,selectors,v,v_max,ratio,evaluations,violations";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{:.4},{},{}",
            self.op,
            self.target,
            format_rational(&self.x),
            self.y.as_ref().map(format_rational).unwrap_or_default(),
            format_rational(&self.g),
            self.selectors.join(" "),
            self.achieved,
            self.v_max,
            self.ratio_f64(),
            self.evaluations,
            self.violations
        )
    }

    pub fn summary(&self) -> String {
        format!(
            "{} i={}: |v|={} v_max={} ratio={:.4} slack={} evaluations={} violations={}",
            self.op,
            self.target,
            self.achieved,
            self.v_max,
            self.ratio_f64(),
            self.slack(),
            self.evaluations,
            self.violations
        )
    }
}

struct Search<'a> {
    spec: &'a ProblemSpec,
    target: usize,
    bits: u32,
    bounds: Vec<BigInt>,
    x_range: (BigInt, BigInt),
    y_range: Option<(BigInt, BigInt)>,
}

impl Search<'_> {
    fn grid(&self, n: &BigInt) -> Rational {
        Rational::new(n.clone(), BigInt::one() << self.bits)
    }

    fn g_for(&self, c: &Candidate, x: &Rational, y: Option<&Rational>) -> Result<Rational> {
        let sigma = &self.spec.sigma;
        let t = Rational::new(c.perturb.into(), (1i64 << PERTURB_BITS).into());
        match y {
            Some(y) => Ok((Rational::one() + sigma * t) / y),
            None => {
                let (lo, hi) = sqrt_bracket(x, 64)?;
                let g_lo = (Rational::one() - sigma) / lo;
                let g_hi = (Rational::one() + sigma) / hi;
                let two = Rational::from_integer(2.into());
                Ok((&g_lo + &g_hi) / &two + (&g_hi - &g_lo) / &two * t)
            }
        }
    }

    fn config(&self, c: &Candidate) -> Result<DsmConfig<Rational>> {
        self.spec.config_with(|i, omega| {
            if i >= self.target {
                DigitSelection::max_magnitude(omega.clone())
            } else if c.bias >> (i - 1) & 1 == 1 {
                DigitSelection::high_biased(omega.clone())
            } else {
                DigitSelection::low_biased(omega.clone())
            }
        })
    }

    fn evaluate(&self, c: &Candidate) -> Result<Evaluation> {
        let x = self.grid(&c.x);
        let y = c.y.as_ref().map(|n| self.grid(n));
        let g = self.g_for(c, &x, y.as_ref())?;
        let config = self.config(c)?;
        let trace = match &y {
            Some(y) => run_div_with_g(&x, y, &config, &g, self.target)?,
            None => run_sqrt_with_g(&x, &config, &g, self.target)?,
        };
        let prev = &trace.states[self.target - 1];
        let beta = Rational::from_integer(self.spec.radices.beta(self.target).into());
        let score = (beta * &prev.proxy).abs();
        let achieved = trace.states[self.target].digit.clone().expect("digit").abs();
        let unsound = trace.states[1..].iter().find_map(|s| {
            let v = s.digit.as_ref().expect("digit").abs();
            (v > self.bounds[s.index]).then(|| format!("|v_{}| = {v} > {}", s.index, self.bounds[s.index]))
        });
        Ok(Evaluation {
            achieved,
            score,
            trace,
            unsound,
        })
    }

    fn random_in(rng: &mut impl Rng, (lo, hi): &(BigInt, BigInt)) -> BigInt {
        let span = (hi - lo).to_u64().expect("grid span fits in u64");
        lo + rng.gen_range(0..=span)
    }

    fn random_candidate(&self, rng: &mut impl Rng) -> Candidate {
        Candidate {
            x: Self::random_in(rng, &self.x_range),
            y: self.y_range.as_ref().map(|r| Self::random_in(rng, r)),
            perturb: rng.gen_range(-(1i64 << PERTURB_BITS)..=(1i64 << PERTURB_BITS)),
            bias: rng.gen::<u64>() & ((1u64 << (self.target - 1)) - 1),
        }
    }

    /// Largest quotient or root, largest admissible `g`, high-biased selectors.
    fn corner_candidate(&self) -> Candidate {
        Candidate {
            x: self.x_range.1.clone(),
            y: self.y_range.as_ref().map(|r| r.0.clone()),
            perturb: 1 << PERTURB_BITS,
            bias: (1u64 << (self.target - 1)) - 1,
        }
    }

    /// Shifts `x` so that `z_j` lands on a selection boundary of step `j`,
    /// using `dz_j/dX` with the earlier digits held fixed.
    fn align_to(&self, c: &Candidate, e: &Evaluation, j: usize, up: bool, ceil: bool, jitter: i64) -> Candidate {
        let beta = Rational::from_integer(self.spec.radices.beta(j).into());
        let z = beta * &e.trace.states[j - 1].proxy;
        let omega = &self.spec.omegas[j - 1];
        let shifted = if up { &z + omega } else { &z - omega };
        let edge = if ceil { shifted.ceil() } else { shifted.floor() };
        let goal = &z + (edge - shifted);
        let b = Rational::from_integer(self.spec.radices.cumulative(j).clone());
        let mut slope = b * &e.trace.g;
        if self.spec.op == Operation::Sqrt && j > 1 {
            slope /= Rational::from_integer(2.into());
        }
        let dx = ((goal - z) / slope * Rational::from_integer(BigInt::one() << self.bits)).round().to_integer() + jitter;
        let mut n = c.clone();
        n.x = (&n.x + dx).max(self.x_range.0.clone()).min(self.x_range.1.clone());
        n
    }

    fn align(&self, c: &Candidate, e: &Evaluation, rng: &mut impl Rng) -> Candidate {
        let j = rng.gen_range(1..=self.target);
        self.align_to(c, e, j, rng.gen(), rng.gen(), rng.gen_range(-1i64..=1))
    }

    /// Aligns steps `from..=target` in order. Each stage tries all four edges
    /// and keeps the one with the largest `|Tp_j|` (the best report at the target).
    fn chain(
        &self,
        start: &(Candidate, Evaluation),
        from: usize,
        eval: &mut dyn FnMut(&Candidate) -> Result<Option<Evaluation>>,
    ) -> Result<Option<(Candidate, Evaluation)>> {
        let mut cur = start.clone();
        for j in from..=self.target {
            let mut best: Option<(Candidate, Evaluation)> = None;
            for (up, ceil) in [(false, false), (false, true), (true, false), (true, true)] {
                let c = self.align_to(&cur.0, &cur.1, j, up, ceil, 0);
                let Some(e) = eval(&c)? else {
                    return Ok(best);
                };
                let pair = (c, e);
                let wins = match &best {
                    None => true,
                    Some(b) if j == self.target => better(&pair, b),
                    Some(b) => pair.1.trace.states[j].proxy.abs() > b.1.trace.states[j].proxy.abs(),
                };
                if wins {
                    best = Some(pair);
                }
            }
            cur = best.expect("four candidates evaluated");
        }
        Ok(Some(cur))
    }

    fn neighbour(&self, c: &Candidate, e: &Evaluation, rng: &mut impl Rng) -> Candidate {
        if rng.gen::<bool>() {
            return self.align(c, e, rng);
        }
        let mut n = c.clone();
        let coords = 3 + usize::from(self.target > 1);
        let step = |rng: &mut dyn rand::RngCore, max_shift: u32| -> i64 {
            let mag = 1i64 << rng.gen_range(0..=max_shift);
            if rng.gen::<bool>() {
                mag
            } else {
                -mag
            }
        };
        let clamp = |v: BigInt, (lo, hi): &(BigInt, BigInt)| v.max(lo.clone()).min(hi.clone());
        match rng.gen_range(0..coords) {
            0 => n.x = clamp(&n.x + step(rng, self.bits - 1), &self.x_range),
            1 => match (&n.y, &self.y_range) {
                (Some(y), Some(r)) => n.y = Some(clamp(y + step(rng, self.bits - 1), r)),
                _ => n.x = clamp(&n.x + step(rng, 8), &self.x_range),
            },
            2 => {
                let lim = 1i64 << PERTURB_BITS;
                n.perturb = (n.perturb + step(rng, PERTURB_BITS)).clamp(-lim, lim);
            }
            _ => n.bias ^= 1 << rng.gen_range(0..self.target - 1),
        }
        n
    }
}

fn better(a: &(Candidate, Evaluation), b: &(Candidate, Evaluation)) -> bool {
    match (&a.1.achieved, &a.1.score).cmp(&(&b.1.achieved, &b.1.score)) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.0 < b.0,
    }
}

struct RestartResult {
    best: (Candidate, Evaluation),
    evaluations: usize,
    violations: usize,
    first_violation: Option<(Candidate, String)>,
}

fn restart(search: &Search<'_>, opts: &SlackOptions, index: usize, evals: usize) -> Result<RestartResult> {
    let mut rng = sample_rng(opts.seed ^ (search.target as u64) << 32, index);
    let start = if index == 0 {
        search.corner_candidate()
    } else {
        search.random_candidate(&mut rng)
    };
    let mut out = RestartResult {
        best: {
            let e = search.evaluate(&start)?;
            (start, e)
        },
        evaluations: 1,
        violations: 0,
        first_violation: None,
    };
    let note = |out: &mut RestartResult, c: &Candidate, e: &Evaluation| {
        if let Some(msg) = &e.unsound {
            out.violations += 1;
            if out.first_violation.is_none() {
                out.first_violation = Some((c.clone(), msg.clone()));
            }
        }
    };
    let (c0, e0) = out.best.clone();
    note(&mut out, &c0, &e0);
    let mut current = out.best.clone();
    while out.evaluations < evals {
        let pair = if rng.gen_range(0..4) == 0 {
            let from = rng.gen_range(1..=search.target);
            let mut eval = |c: &Candidate| -> Result<Option<Evaluation>> {
                if out.evaluations >= evals {
                    return Ok(None);
                }
                let e = search.evaluate(c)?;
                out.evaluations += 1;
                note(&mut out, c, &e);
                Ok(Some(e))
            };
            match search.chain(&current, from, &mut eval)? {
                Some(p) => p,
                None => break,
            }
        } else {
            let cand = search.neighbour(&current.0, &current.1, &mut rng);
            let e = search.evaluate(&cand)?;
            out.evaluations += 1;
            note(&mut out, &cand, &e);
            (cand, e)
        };
        if !better(&current, &pair) {
            current = pair;
            if better(&current, &out.best) {
                out.best = current.clone();
            }
        }
    }
    Ok(out)
}

/// Searches for inputs maximizing `|v_target|` with `budget` evaluations.
pub fn slack_search(spec: &ProblemSpec, target: usize, opts: &SlackOptions) -> Result<SlackReport> {
    if opts.budget == 0 {
        return Err(DsmError::param("budget", "must be positive"));
    }
    if target == 0 || target > spec.steps() {
        return Err(DsmError::param("target", format!("need 1 <= i <= {}", spec.steps())));
    }
    if target > 64 {
        return Err(DsmError::param("target", "at most 64 steps are searched"));
    }
    if opts.grid_bits < 2 || opts.grid_bits > 60 {
        return Err(DsmError::param("grid", "grid bits must lie in 2..=60"));
    }
    let op = match spec.op {
        Operation::DivPrescaled => Operation::Div,
        op => op,
    };
    let table = spec.bound_table()?;
    let bounds = table
        .iter()
        .map(|r| r.digit_bound.clone().unwrap_or_default())
        .collect();
    let one = BigInt::one() << opts.grid_bits;
    let (x_range, y_range) = match op {
        Operation::Sqrt => ((&one >> 2u32, &one - 1), None),
        _ => ((&one >> 1u32, &one - 1), Some((one.clone(), (&one << 1u32) - 1))),
    };
    let search = Search {
        spec,
        target,
        bits: opts.grid_bits,
        bounds,
        x_range,
        y_range,
    };
    let restarts = opts.budget.div_ceil(RESTART_EVALS);
    let shares: Vec<usize> = (0..restarts)
        .map(|k| (opts.budget * (k + 1) / restarts) - (opts.budget * k / restarts))
        .collect();
    let results = shares
        .par_iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(k, &n)| restart(&search, opts, k, n))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<&(Candidate, Evaluation)> = None;
    for r in &results {
        if best.is_none_or(|b| better(&r.best, b)) {
            best = Some(&r.best);
        }
    }
    let (cand, eval) = best.expect("at least one restart");
    let first_violation = results
        .iter()
        .filter_map(|r| r.first_violation.as_ref())
        .min_by(|a, b| a.0.cmp(&b.0))
        .map(|(c, msg)| {
            let y = c.y.as_ref().map(|n| format!(" y={}", format_rational(&search.grid(n)))).unwrap_or_default();
            format!("x={}{y}: {msg}", format_rational(&search.grid(&c.x)))
        });
    let config = search.config(cand)?;
    let v_max = search.bounds[target].clone();
    Ok(SlackReport {
        op,
        target,
        x: search.grid(&cand.x),
        y: cand.y.as_ref().map(|n| search.grid(n)),
        g: eval.trace.g.clone(),
        selectors: (1..=target).map(|i| config.selector(i).kind().to_string()).collect(),
        digits: eval.trace.digits(),
        ratio: if v_max.is_zero() {
            Rational::zero()
        } else {
            Rational::new(eval.achieved.clone(), v_max.clone())
        },
        achieved: eval.achieved.clone(),
        v_max,
        evaluations: results.iter().map(|r| r.evaluations).sum(),
        violations: results.iter().map(|r| r.violations).sum(),
        first_violation,
    })
}
