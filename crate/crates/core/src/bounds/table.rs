use num_bigint::BigInt;

use super::{endpoint_max, tau_sequence, PsiSpec};
use crate::engine::digit_bound;
use crate::error::{DsmError, Result};
use crate::numeric::{decimal_round, format_rational, DecimalMode, Scalar};

/// `tau_i`, `Phi_i(tau_i)`, `tau_p_i` evaluated at one interval endpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct EndpointValues<S> {
    pub at: S,
    pub tau: S,
    pub phi: S,
    pub tau_p: S,
}

/// One row of a bound table.
///
/// Row `i` carries the tail bounds `t_i`, `t_p_i` and the bound on the digit
/// `v_i` (which is derived from row `i - 1`), matching the usual table layout.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow<S> {
    pub index: usize,
    /// `beta_i`; `None` on row 0.
    pub beta: Option<u64>,
    pub cumulative: BigInt,
    pub t: S,
    pub t_p: S,
    /// `floor(beta_i t_p_{i-1} + omega_i)`; `None` on row 0.
    pub digit_bound: Option<BigInt>,
    pub lower: EndpointValues<S>,
    pub upper: EndpointValues<S>,
    /// The one-bit-overlap on-the-fly accumulation accepts `v_i`
    /// (always true for `i <= 1`, otherwise `digit_bound < beta_i`).
    pub narrow_otf: bool,
    /// The two-bit-overlap form accepts `v_i` (`digit_bound < 2 beta_i - 1`).
    pub wide_otf: bool,
}

impl<S> BoundRow<S> {
    pub fn log2_beta(&self) -> Option<u32> {
        self.beta
            .filter(|b| b.is_power_of_two())
            .map(|b| b.trailing_zeros())
    }

    /// Only the wider on-the-fly form applies to this digit.
    pub fn wide_only(&self) -> bool {
        self.wide_otf && !self.narrow_otf
    }
}

/// Builds rows `0..=n`. `interval` defaults to the operation's natural range.
pub fn bound_table<S: Scalar>(
    spec: &PsiSpec<S>,
    omegas: &[S],
    n: usize,
    interval: Option<(S, S)>,
) -> Result<Vec<BoundRow<S>>> {
    let (a, b) = interval.unwrap_or_else(|| spec.default_interval());
    if !a.is_positive() || a > b {
        return Err(DsmError::param("interval", "need 0 < a <= b"));
    }
    let taus = tau_sequence(spec, omegas, n)?;
    let mut rows: Vec<BoundRow<S>> = Vec::with_capacity(n + 1);
    for (i, step) in taus.iter().enumerate() {
        let at = |u: &S| -> Result<EndpointValues<S>> {
            Ok(EndpointValues {
                at: u.clone(),
                tau: step.tau.eval(u)?,
                phi: step.phi.eval(u)?,
                tau_p: step.tau_p.eval(u)?,
            })
        };
        let t = endpoint_max(&step.tau, &a, &b)?;
        let t_p = endpoint_max(&step.tau_p, &a, &b)?;
        let (beta, digit) = if i == 0 {
            (None, None)
        } else {
            let beta = spec.radices.beta(i);
            let z = S::from_integer(&BigInt::from(beta)) * rows[i - 1].t_p.clone();
            (Some(beta), Some(digit_bound(&z, &omegas[i - 1])))
        };
        let (narrow_otf, wide_otf) = match (&digit, beta) {
            (Some(d), Some(beta)) if i >= 2 => {
                let beta = BigInt::from(beta);
                (*d < beta, *d < 2 * &beta - 1)
            }
            _ => (true, true),
        };
        rows.push(BoundRow {
            index: i,
            beta,
            cumulative: spec.radices.cumulative(i).clone(),
            t,
            t_p,
            digit_bound: digit,
            lower: at(&a)?,
            upper: at(&b)?,
            narrow_otf,
            wide_otf,
        });
    }
    Ok(rows)
}

/// Bounds on `|V - H_i| B_i`, i.e. `t_i` for every row.
pub fn head_error_bounds<S: Scalar>(table: &[BoundRow<S>]) -> Vec<S> {
    table.iter().map(|r| r.t.clone()).collect()
}

pub fn render_head_bounds<S: Scalar>(table: &[BoundRow<S>], digits: u32, mode: DecimalMode) -> Vec<String> {
    head_error_bounds(table)
        .iter()
        .map(|t| decimal_round(&t.to_rational(), digits, mode))
        .collect()
}

/// How rational cells are written.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueFormat {
    Exact,
    Decimal { digits: u32, mode: DecimalMode },
}

impl Default for ValueFormat {
    fn default() -> Self {
        ValueFormat::Decimal {
            digits: 4,
            mode: DecimalMode::Nearest,
        }
    }
}

impl ValueFormat {
    pub fn render<S: Scalar>(&self, v: &S) -> String {
        match *self {
            ValueFormat::Exact => format_rational(&v.to_rational()),
            ValueFormat::Decimal { digits, mode } => decimal_round(&v.to_rational(), digits, mode),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

const COLUMNS: [&str; 15] = [
    "i",
    "log2_beta",
    "beta",
    "B",
    "t",
    "t_p",
    "digit_bound",
    "tau_a",
    "phi_a",
    "tau_p_a",
    "tau_b",
    "phi_b",
    "tau_p_b",
    "narrow_otf",
    "wide_otf",
];

fn row_cells<S: Scalar>(r: &BoundRow<S>, fmt: ValueFormat) -> Vec<String> {
    let opt = |o: Option<String>| o.unwrap_or_default();
    vec![
        r.index.to_string(),
        opt(r.log2_beta().map(|b| b.to_string())),
        opt(r.beta.map(|b| b.to_string())),
        r.cumulative.to_string(),
        fmt.render(&r.t),
        fmt.render(&r.t_p),
        opt(r.digit_bound.as_ref().map(|d| d.to_string())),
        fmt.render(&r.lower.tau),
        fmt.render(&r.lower.phi),
        fmt.render(&r.lower.tau_p),
        fmt.render(&r.upper.tau),
        fmt.render(&r.upper.phi),
        fmt.render(&r.upper.tau_p),
        r.narrow_otf.to_string(),
        r.wide_otf.to_string(),
    ]
}

impl TableFormat {
    pub fn render<S: Scalar>(&self, rows: &[BoundRow<S>], fmt: ValueFormat) -> String {
        match self {
            TableFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(COLUMNS).unwrap();
                for r in rows {
                    w.write_record(row_cells(r, fmt)).unwrap();
                }
                String::from_utf8(w.into_inner().unwrap()).unwrap()
            }
            TableFormat::Markdown => {
                let mut out = format!("| {} |\n", COLUMNS.join(" | "));
                out.push_str(&format!("|{}\n", "---|".repeat(COLUMNS.len())));
                for r in rows {
                    out.push_str(&format!("| {} |\n", row_cells(r, fmt).join(" | ")));
                }
                out
            }
        }
    }
}
