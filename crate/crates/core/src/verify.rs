//! Seeded random sweeps that check every invariant and certified bound of a
//! division or square-root configuration.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::BoundRow;
use crate::divsqrt::{
    check_div_proxy, check_sqrt_psi, run_div, run_op, Operation, RecipApprox, RemainderTrace, RootBracket,
};
use crate::engine::{run, DigitSelection, DsmConfig, RelativeErrorProxy, RunMode};
use crate::error::{DsmError, Result};
use crate::numeric::{format_rational, Rational};
use crate::problem::ProblemSpec;

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
    /// Inputs are drawn from the grid `2^-grid_bits`.
    pub grid_bits: u32,
    /// Draw a random selector per step (configured, low, high or max-magnitude)
    /// instead of always using the configured one.
    pub vary_selectors: bool,
    pub root_bits: u32,
    pub max_root_bits: u32,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 1000,
            seed: 0,
            grid_bits: 24,
            vary_selectors: true,
            root_bits: 128,
            max_root_bits: 4096,
        }
    }
}

/// First failed check of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub sample: usize,
    pub x: Rational,
    pub y: Option<Rational>,
    pub selectors: Vec<String>,
    pub step: usize,
    pub check: String,
}

impl Violation {
    /// A command line that replays the failing run.
    pub fn reproducer(&self, spec: &ProblemSpec) -> String {
        let betas: Vec<String> = spec.radices.betas().iter().map(u64::to_string).collect();
        let omegas: Vec<String> = spec.omegas.iter().map(format_rational).collect();
        let mut cmd = format!(
            "run --op {} --sigma {} --betas {} --omegas {} --x {}",
            spec.op,
            format_rational(&spec.sigma),
            betas.join(","),
            omegas.join(","),
            format_rational(&self.x),
        );
        if let Some(y) = &self.y {
            cmd.push_str(&format!(" --y {}", format_rational(y)));
        }
        format!(
            "sample {} step {}: {} (selectors {})\n  {}",
            self.sample,
            self.step,
            self.check,
            self.selectors.join(","),
            cmd
        )
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub samples: usize,
    pub seed: u64,
    /// Ordered by sample index.
    pub violations: Vec<Violation>,
}

impl VerifyReport {
    pub fn passed(&self) -> usize {
        self.samples - self.violations.len()
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        format!("{}/{} pass (seed {})", self.passed(), self.samples, self.seed)
    }
}

/// Stream-separated generator for sample `index`.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Uniform grid point `n 2^-bits` in `[lo, hi)`.
pub fn grid_point(rng: &mut impl Rng, lo: &Rational, hi: &Rational, bits: u32) -> Rational {
    let scale = Rational::from_integer(BigInt::one() << bits);
    let a = (lo * &scale).ceil().to_integer();
    let b = (hi * &scale).ceil().to_integer();
    let span = (&b - &a).to_u64().expect("grid span fits in u64").max(1);
    let pick: u64 = rng.gen_range(0..span);
    Rational::new(a + pick, BigInt::one() << bits)
}

/// Operand domain `([x_lo, x_hi), [y_lo, y_hi))` of an operation.
pub fn operand_domain(op: Operation) -> ((Rational, Rational), Option<(Rational, Rational)>) {
    let r = |n: i64, d: i64| Rational::new(n.into(), d.into());
    match op {
        Operation::Div | Operation::DivPrescaled => ((r(1, 2), r(1, 1)), Some((r(1, 1), r(2, 1)))),
        Operation::Sqrt => ((r(1, 4), r(1, 1)), None),
    }
}

fn draw_inputs(op: Operation, index: usize, rng: &mut ChaCha8Rng, bits: u32) -> (Rational, Option<Rational>) {
    let ((xl, xh), ydom) = operand_domain(op);
    let ulp = Rational::new(BigInt::one(), BigInt::one() << bits);
    // the first samples sit on the corners of the domain
    let corner = |k: usize, lo: &Rational, hi: &Rational| if k == 0 { lo.clone() } else { hi - &ulp };
    if index < 4 {
        let x = corner(index & 1, &xl, &xh);
        let y = ydom.map(|(yl, yh)| corner(index >> 1, &yl, &yh));
        return (x, y);
    }
    let x = grid_point(rng, &xl, &xh, bits);
    let y = ydom.map(|(yl, yh)| grid_point(rng, &yl, &yh, bits));
    (x, y)
}

fn draw_selectors(spec: &ProblemSpec, rng: &mut ChaCha8Rng, vary: bool) -> Result<DsmConfig<Rational>> {
    spec.config_with(|i, omega| {
        let choice = if vary { rng.gen_range(0..4) } else { 0 };
        match choice {
            0 => spec.selector(i),
            1 => DigitSelection::low_biased(omega.clone()),
            2 => DigitSelection::high_biased(omega.clone()),
            _ => DigitSelection::max_magnitude(omega.clone()),
        }
    })
}

fn fail(step: usize, check: impl Into<String>) -> (usize, String) {
    (step, check.into())
}

/// Checks one run against the bound table; returns the failing step and check.
pub fn check_trace(
    spec: &ProblemSpec,
    table: &[BoundRow<Rational>],
    recip: &RecipApprox,
    config: &DsmConfig<Rational>,
    trace: &RemainderTrace,
    opts: &VerifyOptions,
) -> std::result::Result<(), (usize, String)> {
    for s in &trace.states[1..] {
        let bound = table[s.index].digit_bound.as_ref().expect("rows after 0 bound a digit");
        let v = s.digit.as_ref().expect("digit after step 0");
        if v.abs() > *bound {
            return Err(fail(s.index, format!("|v| = {} exceeds digit bound {bound}", v.abs())));
        }
    }
    for s in &trace.states {
        if s.proxy.abs() > table[s.index].t_p {
            return Err(fail(s.index, format!("|Tp| = {} exceeds t_p", format_rational(&s.proxy.abs()))));
        }
    }
    match trace.op {
        Operation::Div | Operation::DivPrescaled => {
            let y = trace.y.as_ref().expect("division trace");
            let sigma = match trace.op {
                Operation::Div => &trace.g * y - Rational::one(),
                _ => y - Rational::one(),
            };
            if sigma.abs() > spec.sigma {
                return Err(fail(0, "|sigma(Y)| exceeds sigma"));
            }
            check_div_proxy(trace).map_err(|e| fail(0, e.to_string()))?;
            for s in &trace.states {
                let t = &s.remainder / y;
                if t.abs() > table[s.index].t {
                    return Err(fail(s.index, format!("|T| = {} exceeds t", format_rational(&t.abs()))));
                }
            }
            let last = trace.last();
            let err = (&trace.x / y - &last.head).abs();
            if err > &table[last.index].t / Rational::from_integer(last.cumulative.clone()) {
                return Err(fail(last.index, "head error exceeds t/B"));
            }
            if trace.op == Operation::Div {
                cross_check_engine(trace, config).map_err(|(i, m)| fail(i, m))?;
            }
        }
        Operation::Sqrt => {
            check_sqrt_psi(trace, recip.sigma_bound(), opts.root_bits, opts.max_root_bits)
                .map_err(|e| fail(0, e.to_string()))?;
            let mut root = RootBracket::new(&trace.x, opts.root_bits).map_err(|e| fail(0, e.to_string()))?;
            for s in &trace.states {
                loop {
                    let (lo, hi) = root.tail(s);
                    let t = &table[s.index].t;
                    if lo.abs().max(hi.abs()) <= *t {
                        break;
                    }
                    let sure = if lo.is_positive() { lo.clone() } else if hi.is_negative() { -hi.clone() } else { Rational::zero() };
                    if sure > *t || root.bits >= opts.max_root_bits {
                        return Err(fail(s.index, "|T| exceeds t (head error exceeds t/B)"));
                    }
                    root = root.refine().map_err(|e| fail(s.index, e.to_string()))?;
                }
            }
        }
    }
    Ok(())
}

/// The generic engine with `psi = sigma(Y)` must reproduce a division trace.
fn cross_check_engine(trace: &RemainderTrace, config: &DsmConfig<Rational>) -> std::result::Result<(), (usize, String)> {
    let y = trace.y.as_ref().expect("division trace");
    let sigma = &trace.g * y - Rational::one();
    let v = &trace.x / y;
    let proxy = RelativeErrorProxy(move |_: usize, _: &Rational, _: &Rational| sigma.clone());
    let steps = trace.states.len() - 1;
    let eng = run(&v, config, steps, RunMode::Proxy(&proxy)).map_err(|e| (0, e.to_string()))?;
    for (a, b) in eng.states.iter().zip(&trace.states) {
        if a.digit != b.digit || a.tail != &b.remainder / y || a.head != b.head {
            return Err((a.index, "engine trace differs from remainder trace".into()));
        }
    }
    Ok(())
}

fn check_sample(
    spec: &ProblemSpec,
    table: &[BoundRow<Rational>],
    recip: &RecipApprox,
    opts: &VerifyOptions,
    index: usize,
) -> Result<Option<Violation>> {
    let mut rng = sample_rng(opts.seed, index);
    let (x, y) = draw_inputs(spec.op, index, &mut rng, opts.grid_bits);
    let config = draw_selectors(spec, &mut rng, opts.vary_selectors)?;
    let selectors = (1..=config.steps()).map(|i| config.selector(i).kind().to_string()).collect();
    let violation = |step: usize, check: String| Violation {
        sample: index,
        x: x.clone(),
        y: y.clone(),
        selectors,
        step,
        check,
    };
    let trace = match run_op(spec.op, &x, y.as_ref(), &config, recip, spec.steps()) {
        Ok(t) => t,
        Err(DsmError::Invariant { step, what }) => return Ok(Some(violation(step, what))),
        Err(e) => return Err(e),
    };
    if let Err((step, check)) = check_trace(spec, table, recip, &config, &trace, opts) {
        return Ok(Some(violation(step, check)));
    }
    if spec.op == Operation::DivPrescaled {
        let plain = run_div(&x, y.as_ref().expect("division"), &config, recip, spec.steps())?;
        if plain.digits() != trace.digits() {
            return Ok(Some(violation(spec.steps(), "prescaled digits differ from plain division".into())));
        }
    }
    Ok(None)
}

/// Runs `opts.samples` seeded samples in parallel; results are ordered by index.
pub fn verify(spec: &ProblemSpec, opts: &VerifyOptions) -> Result<VerifyReport> {
    let table = spec.bound_table()?;
    let recip = spec.recip()?;
    if *recip.sigma_bound() > spec.sigma {
        return Err(DsmError::param("sigma", "approximation error exceeds sigma"));
    }
    let results: Vec<Result<Option<Violation>>> = (0..opts.samples)
        .into_par_iter()
        .map(|i| check_sample(spec, &table, &recip, opts, i))
        .collect();
    let mut violations = Vec::new();
    for r in results {
        if let Some(v) = r? {
            violations.push(v);
        }
    }
    Ok(VerifyReport {
        samples: opts.samples,
        seed: opts.seed,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RadixSequence;
    use crate::numeric::parse_rational;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn spec(op: Operation, betas: &[u64]) -> ProblemSpec {
        ProblemSpec::new(op, q("2^-9"), RadixSequence::new(betas.to_vec()).unwrap(), vec![q("5/8")]).unwrap()
    }

    fn opts(samples: usize) -> VerifyOptions {
        VerifyOptions {
            samples,
            seed: 7,
            ..VerifyOptions::default()
        }
    }

    #[test]
    fn small_sweeps_pass() {
        for op in [Operation::Div, Operation::DivPrescaled, Operation::Sqrt] {
            let r = verify(&spec(op, &[128, 32, 128, 128]), &opts(40)).unwrap();
            assert!(r.ok(), "{op}: {:?}", r.violations.first());
            assert_eq!(r.summary(), "40/40 pass (seed 7)");
        }
    }

    #[test]
    fn deterministic_draws() {
        let mut a = sample_rng(3, 11);
        let mut b = sample_rng(3, 11);
        let one = Rational::one();
        let two = &one + &one;
        assert_eq!(grid_point(&mut a, &one, &two, 24), grid_point(&mut b, &one, &two, 24));
        let p = grid_point(&mut a, &one, &two, 24);
        assert!(p >= one && p < two);
    }

    #[test]
    fn too_loose_table_is_caught() {
        // bounds computed for sigma = 0 cannot cover a run with sigma = 2^-9
        let loose = ProblemSpec::new(Operation::Div, q("0"), RadixSequence::new(vec![128; 4]).unwrap(), vec![q("5/8")]).unwrap();
        let real = spec(Operation::Div, &[128; 4]);
        let table = loose.bound_table().unwrap();
        let recip = real.recip().unwrap();
        let mut found = false;
        for k in 0..200 {
            let mut rng = sample_rng(1, k);
            let (x, y) = draw_inputs(Operation::Div, k, &mut rng, 24);
            let cfg = DsmConfig::uniform(real.radices.clone(), DigitSelection::max_magnitude(q("5/8")).unwrap());
            let t = run_div(&x, y.as_ref().unwrap(), &cfg, &recip, 4).unwrap();
            found |= check_trace(&real, &table, &recip, &cfg, &t, &opts(1)).is_err();
        }
        assert!(found);
    }

    #[test]
    fn reproducer_mentions_inputs() {
        let v = Violation {
            sample: 3,
            x: q("1/2"),
            y: Some(q("3/2")),
            selectors: vec!["low".into()],
            step: 2,
            check: "x".into(),
        };
        let s = v.reproducer(&spec(Operation::Div, &[128]));
        assert!(s.contains("--x 1/2 --y 3/2"));
        assert!(s.contains("--betas 128"));
    }
}
