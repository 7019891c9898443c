use crate::bounds::{bound_table, BoundRow, PsiSpec};
use crate::divsqrt::{make_recip, Operation, RecipApprox};
use crate::engine::{make_dsf, DigitSelection, DsfFamily, DsmConfig, RadixSequence};
use crate::error::{DsmError, Result};
use crate::numeric::{Rational, TieRule};

/// One parameter set: operation, `sigma`, radices and per-step `omega` budgets.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub op: Operation,
    pub sigma: Rational,
    pub radices: RadixSequence,
    /// `omegas[i - 1]` is the budget `omega_i` for digit `v_i`. The constructor
    /// also accepts a single value, or `n + 1` values starting at the unused `omega_0`.
    pub omegas: Vec<Rational>,
    pub dsf: DsfFamily,
    pub tie: TieRule,
}

impl ProblemSpec {
    pub fn new(op: Operation, sigma: Rational, radices: RadixSequence, omegas: Vec<Rational>) -> Result<Self> {
        let omegas = match omegas.len() {
            1 => vec![omegas[0].clone(); radices.len()],
            n if n == radices.len() => omegas,
            n if n == radices.len() + 1 => omegas[1..].to_vec(),
            n => {
                return Err(DsmError::param(
                    "omegas",
                    format!("{n} values given for {} radices", radices.len()),
                ))
            }
        };
        let spec = ProblemSpec {
            op,
            sigma,
            radices,
            omegas,
            dsf: DsfFamily::Truncating,
            tie: TieRule::HalfEven,
        };
        spec.psi_spec()?;
        Ok(spec)
    }

    pub fn with_dsf(mut self, dsf: DsfFamily) -> Self {
        self.dsf = dsf;
        self
    }

    pub fn steps(&self) -> usize {
        self.radices.len()
    }

    pub fn psi_spec(&self) -> Result<PsiSpec<Rational>> {
        PsiSpec::new(self.op.proxy_kind(), self.sigma.clone(), self.radices.clone())
    }

    pub fn bound_table(&self) -> Result<Vec<BoundRow<Rational>>> {
        bound_table(&self.psi_spec()?, &self.omegas, self.steps(), None)
    }

    pub fn recip(&self) -> Result<RecipApprox> {
        make_recip(self.op.recip_kind(), &self.sigma)
    }

    /// Selector of the configured family for step `i`, falling back to exact
    /// nearest when a truncating selector cannot fit a budget of exactly 1/2.
    pub fn selector(&self, i: usize) -> Result<DigitSelection<Rational>> {
        let omega = &self.omegas[i - 1];
        match make_dsf(self.dsf, omega, self.tie) {
            Err(_) if self.dsf == DsfFamily::Truncating => make_dsf(DsfFamily::ExactNearest, omega, self.tie),
            other => other,
        }
    }

    pub fn config(&self) -> Result<DsmConfig<Rational>> {
        let selectors = (1..=self.steps()).map(|i| self.selector(i)).collect::<Result<Vec<_>>>()?;
        DsmConfig::new(self.radices.clone(), selectors)
    }

    /// Configuration using `pick(i, omega_i)` for every step.
    pub fn config_with(
        &self,
        mut pick: impl FnMut(usize, &Rational) -> Result<DigitSelection<Rational>>,
    ) -> Result<DsmConfig<Rational>> {
        let selectors = self
            .omegas
            .iter()
            .enumerate()
            .map(|(k, w)| pick(k + 1, w))
            .collect::<Result<Vec<_>>>()?;
        DsmConfig::new(self.radices.clone(), selectors)
    }
}
