mod config;

use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_traits::Signed;

use dsm::bounds::{render_head_bounds, TableFormat, ValueFormat};
use dsm::divsqrt::{run_op, scale_div, scale_sqrt, unscale, FloatLikeInput, Operation};
use dsm::engine::{DsfFamily, RadixSequence};
use dsm::numeric::{decimal_round, parse_rational, parse_rational_list, DecimalMode};
use dsm::otf::{otf_accumulate, reference_accumulate, OtfMode};
use dsm::problem::ProblemSpec;
use dsm::slack::{slack_search, SlackOptions, SlackReport};
use dsm::verify::{verify, VerifyOptions};
use dsm::{DsmError, Rational};

/// Digit serial division and square root with certified bounds.
#[derive(Parser, Debug)]
#[command(name = "dsm", version, args_override_self = true)]
struct Cli {
    /// Read `key = value` lines (long flag names) before the command line flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Tail, proxy and digit bounds per step, plus head error bounds.
    Bounds(BoundsArgs),
    /// Run division or square root on one input and print the trace.
    Run(RunArgs),
    /// Check invariants and bounds on seeded random inputs.
    Verify(VerifyArgs),
    /// Accumulate digits on the fly and compare with multiply-add.
    Otf(OtfArgs),
    /// Search for inputs that push digits towards their bounds.
    Slack(SlackArgs),
}

#[derive(Clone, Debug)]
struct RationalList(Vec<Rational>);

#[derive(Clone, Debug)]
struct IntList<T>(Vec<T>);

fn rational(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn rational_list(s: &str) -> Result<RationalList, String> {
    let v = parse_rational_list(s).map_err(|e| e.to_string())?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(RationalList(v))
}

fn int_list<T: std::str::FromStr>(s: &str) -> Result<IntList<T>, String> {
    let v = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|_| format!("bad integer `{p}`")))
        .collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(IntList(v))
}

fn interval(s: &str) -> Result<(Rational, Rational), String> {
    match rational_list(s)?.0.as_slice() {
        [a, b] if a <= b => Ok((a.clone(), b.clone())),
        [_, _] => Err("need a <= b".into()),
        _ => Err("expected `a,b`".into()),
    }
}

#[derive(Args, Debug, Clone)]
struct ProblemArgs {
    /// div, div-prescaled or sqrt.
    #[arg(long, default_value = "div")]
    op: Operation,
    /// Bound on the relative error of the reciprocal approximation.
    #[arg(long, default_value = "2^-9", value_parser = rational)]
    sigma: Rational,
    /// Digit selection budget used for every step.
    #[arg(long, default_value = "5/8", value_parser = rational)]
    omega: Rational,
    /// Per-step budgets: one value, one per step, or one per step preceded by omega_0.
    #[arg(long, value_parser = rational_list, allow_hyphen_values = true)]
    omegas: Option<RationalList>,
    /// Radices, each at least 2 (powers of two for on-the-fly accumulation).
    #[arg(long, value_parser = int_list::<u64>)]
    betas: IntList<u64>,
    /// Selector family: truncating, nearest, low, high or max.
    #[arg(long, default_value = "truncating")]
    dsf: DsfFamily,
}

impl ProblemArgs {
    fn spec(&self) -> Result<ProblemSpec, DsmError> {
        let radices = RadixSequence::new(self.betas.0.clone())?;
        let omegas = match &self.omegas {
            Some(l) => l.0.clone(),
            None => vec![self.omega.clone()],
        };
        Ok(ProblemSpec::new(self.op, self.sigma.clone(), radices, omegas)?.with_dsf(self.dsf))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Markdown,
    Text,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Round {
    Nearest,
    Ceiling,
}

impl From<Round> for DecimalMode {
    fn from(r: Round) -> Self {
        match r {
            Round::Nearest => DecimalMode::Nearest,
            Round::Ceiling => DecimalMode::Ceiling,
        }
    }
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Interval `a,b` for the normalized value (default: the operation's own).
    #[arg(long, value_parser = interval)]
    interval: Option<(Rational, Rational)>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long, default_value_t = 4)]
    decimals: u32,
    #[arg(long, value_enum, default_value = "nearest")]
    round: Round,
    /// Print exact `p/q` values instead of decimals.
    #[arg(long)]
    exact: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Dividend or radicand in its normalized range.
    #[arg(long, value_parser = rational, conflicts_with = "input")]
    x: Option<Rational>,
    /// Divisor in [1, 2).
    #[arg(long, value_parser = rational, conflicts_with = "input_y")]
    y: Option<Rational>,
    /// Dividend or radicand as `f,k,e`, meaning (1 + f 2^-k) 2^e.
    #[arg(long)]
    input: Option<FloatLikeInput>,
    /// Divisor as `f,k,e`.
    #[arg(long)]
    input_y: Option<FloatLikeInput>,
    /// Number of digits (default: one per radix).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inputs lie on the grid 2^-bits.
    #[arg(long, default_value_t = 24)]
    grid_bits: u32,
    /// Always use the configured selector instead of a random one per step.
    #[arg(long)]
    fixed_dsf: bool,
}

#[derive(Args, Debug)]
struct OtfArgs {
    /// Radices; the first only bounds the leading digit.
    #[arg(long, value_parser = int_list::<u64>)]
    betas: IntList<u64>,
    #[arg(long, value_parser = int_list::<BigInt>, allow_hyphen_values = true)]
    digits: IntList<BigInt>,
    #[arg(long, default_value = "narrow")]
    mode: OtfMode,
    /// Print the kept vectors after every append.
    #[arg(long)]
    dump: bool,
}

#[derive(Args, Debug)]
struct SlackArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Digit index to push (default: every step).
    #[arg(long)]
    target: Option<usize>,
    /// Evaluations per target digit.
    #[arg(long, default_value_t = 10_000)]
    budget: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 24)]
    grid_bits: u32,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

enum Failure {
    /// Exit code 1.
    Check(String),
    /// Exit code 2.
    Usage(String),
}

impl From<DsmError> for Failure {
    fn from(e: DsmError) -> Self {
        match e {
            DsmError::Invariant { .. } => Failure::Check(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::expand(argv, &Cli::command()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    let out = match cli.command {
        Cmd::Bounds(a) => cmd_bounds(&a),
        Cmd::Run(a) => cmd_run(&a),
        Cmd::Verify(a) => cmd_verify(&a),
        Cmd::Otf(a) => cmd_otf(&a),
        Cmd::Slack(a) => cmd_slack(&a),
    };
    match out {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(Failure::Check(text)) => {
            print!("{text}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn cmd_bounds(a: &BoundsArgs) -> Result<String, Failure> {
    let spec = a.problem.spec()?;
    let table = dsm::bounds::bound_table(&spec.psi_spec()?, &spec.omegas, spec.steps(), a.interval.clone())?;
    let mode = DecimalMode::from(a.round);
    let fmt = if a.exact {
        ValueFormat::Exact
    } else {
        ValueFormat::Decimal {
            digits: a.decimals,
            mode,
        }
    };
    let heads: Vec<String> = if a.exact {
        table.iter().map(|r| fmt.render(&r.t)).collect()
    } else {
        render_head_bounds(&table, a.decimals, mode)
    };
    let mut s = String::new();
    match a.format {
        Format::Csv => s.push_str(&TableFormat::Csv.render(&table, fmt)),
        Format::Markdown => {
            s.push_str(&TableFormat::Markdown.render(&table, fmt));
            s.push_str("\nHead error bounds:\n\n");
            for (r, h) in table.iter().zip(&heads) {
                writeln!(s, "- |V - H_{i}| <= {h} / B_{i}", i = r.index).unwrap();
            }
        }
        Format::Text => {
            let cells: Vec<[String; 6]> = table
                .iter()
                .map(|r| {
                    let flag = if r.narrow_otf {
                        "narrow"
                    } else if r.wide_otf {
                        "wide"
                    } else {
                        "none"
                    };
                    [
                        r.index.to_string(),
                        r.beta.map(|b| b.to_string()).unwrap_or_else(|| "-".into()),
                        fmt.render(&r.t),
                        fmt.render(&r.t_p),
                        r.digit_bound.as_ref().map(|d| d.to_string()).unwrap_or_else(|| "-".into()),
                        flag.to_string(),
                    ]
                })
                .collect();
            let head = ["i", "beta", "t", "t_p", "digit_bound", "otf"];
            let w: Vec<usize> = (0..6)
                .map(|k| cells.iter().map(|c| c[k].len()).chain([head[k].len()]).max().unwrap())
                .collect();
            let line = |c: &[&str]| {
                c.iter()
                    .zip(&w)
                    .map(|(x, w)| format!("{x:>w$}"))
                    .collect::<Vec<_>>()
                    .join("  ")
            };
            writeln!(s, "{}", line(&head)).unwrap();
            for c in &cells {
                let refs: Vec<&str> = c.iter().map(String::as_str).collect();
                writeln!(s, "{}", line(&refs)).unwrap();
            }
            s.push('\n');
            for (r, h) in table.iter().zip(&heads) {
                writeln!(s, "|V - H_{i}| <= {h} / B_{i}", i = r.index).unwrap();
            }
        }
    }
    Ok(s)
}

fn cmd_run(a: &RunArgs) -> Result<String, Failure> {
    let spec = a.problem.spec()?;
    let usage = |m: &str| Failure::Usage(m.to_string());
    let is_div = spec.op != Operation::Sqrt;
    let (x, y, exponent) = match (&a.input, &a.x) {
        (Some(fx), _) => {
            if is_div {
                let fy = a.input_y.as_ref().ok_or_else(|| usage("--input-y: division needs a divisor"))?;
                let sc = scale_div(fx, fy);
                (sc.x, Some(sc.y), Some(sc.exponent))
            } else {
                let sc = scale_sqrt(fx);
                (sc.x, None, Some(sc.exponent))
            }
        }
        (None, Some(x)) => {
            let y = match (is_div, &a.y) {
                (true, None) => return Err(usage("--y: division needs a divisor")),
                (true, Some(y)) => Some(y.clone()),
                (false, _) => None,
            };
            (x.clone(), y, None)
        }
        (None, None) => return Err(usage("--x: an input is required (or --input)")),
    };
    let steps = a.steps.unwrap_or(spec.steps());
    if steps == 0 || steps > spec.steps() {
        return Err(usage(&format!("--steps: need 1 <= steps <= {}", spec.steps())));
    }
    let config = spec.config()?;
    let recip = spec.recip()?;
    let trace = run_op(spec.op, &x, y.as_ref(), &config, &recip, steps)?;
    let table = spec.bound_table()?;
    let last = trace.last();
    let t = &table[steps].t;
    let err = t / Rational::from_integer(last.cumulative.clone());

    let mut s = String::new();
    match a.format {
        Format::Csv => s.push_str(&trace.to_csv()),
        Format::Markdown | Format::Text => {
            let md = a.format == Format::Markdown;
            writeln!(s, "op {}  X = {x}{}  g = {}", spec.op, y.as_ref().map(|y| format!("  Y = {y}")).unwrap_or_default(), trace.g).unwrap();
            if md {
                s.push_str("\n| i | B | H | v | R | Tp |\n|---|---|---|---|---|---|\n");
            }
            for st in &trace.states {
                let v = st.digit.as_ref().map(|d| d.to_string()).unwrap_or_else(|| "-".into());
                if md {
                    writeln!(s, "| {} | {} | {} | {v} | {} | {} |", st.index, st.cumulative, st.head, st.remainder, st.proxy).unwrap();
                } else {
                    writeln!(s, "i={} B={} H={} v={v} R={} Tp={}", st.index, st.cumulative, st.head, st.remainder, st.proxy).unwrap();
                }
            }
            if md {
                s.push('\n');
            }
            writeln!(s, "H_{steps} = {}", last.head).unwrap();
            writeln!(s, "R_{steps} = {}", last.remainder).unwrap();
            writeln!(s, "|V - H_{steps}| <= {}", decimal_round(&err, 12, DecimalMode::Ceiling)).unwrap();
            if let Some(e) = exponent {
                let r = unscale(&last.head, e);
                writeln!(s, "result = {r} = H_{steps} * 2^{e}").unwrap();
                writeln!(s, "|result error| <= {}", decimal_round(&unscale(&err, e), 12, DecimalMode::Ceiling)).unwrap();
            }
        }
    }
    Ok(s)
}

fn cmd_verify(a: &VerifyArgs) -> Result<String, Failure> {
    let spec = a.problem.spec()?;
    let opts = VerifyOptions {
        samples: a.samples,
        seed: a.seed,
        grid_bits: a.grid_bits,
        vary_selectors: !a.fixed_dsf,
        ..VerifyOptions::default()
    };
    let report = verify(&spec, &opts)?;
    let mut s = String::new();
    for v in &report.violations {
        writeln!(s, "{}", v.reproducer(&spec)).unwrap();
    }
    writeln!(s, "{}", report.summary()).unwrap();
    if report.ok() {
        Ok(s)
    } else {
        Err(Failure::Check(s))
    }
}

/// `d1*(b2*b3) + d2*b3 + d3` with signs folded in.
fn otf_expression(betas: &[u64], digits: &[BigInt]) -> String {
    let n = digits.len();
    let mut s = String::new();
    for (k, d) in digits.iter().enumerate() {
        let weights: Vec<String> = betas[k + 1..n].iter().map(u64::to_string).collect();
        let mag = d.abs();
        let term = match weights.len() {
            0 => mag.to_string(),
            1 => format!("{mag}*{}", weights[0]),
            _ => format!("{mag}*({})", weights.join("*")),
        };
        match (k, d.is_negative()) {
            (0, false) => s.push_str(&term),
            (0, true) => write!(s, "-{term}").unwrap(),
            (_, false) => write!(s, " + {term}").unwrap(),
            (_, true) => write!(s, " - {term}").unwrap(),
        }
    }
    s
}

fn cmd_otf(a: &OtfArgs) -> Result<String, Failure> {
    let (betas, digits) = (&a.betas.0, &a.digits.0);
    if betas.len() != digits.len() {
        return Err(Failure::Usage(format!(
            "--digits: {} digits given for {} radices",
            digits.len(),
            betas.len()
        )));
    }
    RadixSequence::new(betas.clone())?;
    let acc = otf_accumulate(a.mode, betas, digits)?;
    let got = acc.value();
    let want = reference_accumulate(betas, digits);
    let mut s = String::new();
    if a.dump {
        s.push_str(&acc.dump());
    }
    let expr = otf_expression(betas, digits);
    if got == want {
        writeln!(s, "otf == reference: {got} = {expr}").unwrap();
        Ok(s)
    } else {
        writeln!(s, "otf != reference: {got} vs {want} = {expr}").unwrap();
        Err(Failure::Check(s))
    }
}

fn cmd_slack(a: &SlackArgs) -> Result<String, Failure> {
    let spec = a.problem.spec()?;
    let opts = SlackOptions {
        budget: a.budget,
        seed: a.seed,
        grid_bits: a.grid_bits,
    };
    let targets: Vec<usize> = match a.target {
        Some(t) => vec![t],
        None => (1..=spec.steps()).collect(),
    };
    let reports = targets
        .iter()
        .map(|&t| slack_search(&spec, t, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let mut s = String::new();
    match a.format {
        Format::Csv => {
            writeln!(s, "{}", SlackReport::CSV_HEADER).unwrap();
            for r in &reports {
                writeln!(s, "{}", r.csv_row()).unwrap();
            }
        }
        Format::Markdown | Format::Text => {
            writeln!(s, "seed {}", a.seed).unwrap();
            for r in &reports {
                writeln!(s, "{}", r.summary()).unwrap();
                let y = r.y.as_ref().map(|y| format!(" y={y}")).unwrap_or_default();
                writeln!(s, "  x={}{y} g={} selectors={}", r.x, r.g, r.selectors.join(",")).unwrap();
                if let Some(v) = &r.first_violation {
                    writeln!(s, "  violation: {v}").unwrap();
                }
            }
        }
    }
    if reports.iter().all(SlackReport::sound) {
        Ok(s)
    } else {
        Err(Failure::Check(s))
    }
}
