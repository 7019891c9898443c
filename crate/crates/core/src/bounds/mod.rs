//! Bound calculator for digit serial methods that select digits from a proxy.
//!
//! With `|psi_i| <= Psi_i(V, |T_i|)` (non-decreasing in its second argument),
//! the tails and proxies are bounded by
//!
//! ```text
//! tau_0(u)     = u
//! tau_{i+1}(u) = beta_{i+1} Psi_i(u, tau_i(u)) tau_i(u) + omega_{i+1}
//! tau_p_i(u)   = (1 + Psi_i(u, tau_i(u))) tau_i(u)
//! ```
//!
//! For division and square root `u -> Psi_i(u, p(u))` maps posynomials to
//! posynomials, so every `tau_i` is a posynomial and its maximum over an
//! interval `[a, b]` is `max(tau_i(a), tau_i(b))`. The digit `v_{i+1}` is then
//! bounded by `floor(beta_{i+1} t_p_i + omega_{i+1})`.

mod posynomial;
mod table;

pub use posynomial::{
    endpoint_max, posy_add, posy_div_by_nu, posy_eval, posy_mul, posy_scale, Posynomial,
};
pub use table::{bound_table, head_error_bounds, render_head_bounds, BoundRow, EndpointValues, TableFormat, ValueFormat};

use num_bigint::BigInt;

use crate::engine::RadixSequence;
use crate::error::{DsmError, Result};
use crate::numeric::Scalar;

/// Which relative-error bound `Psi_i` applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProxyKind {
    /// `Psi_i(V, t) = sigma`.
    Division,
    /// `Psi_0 = sigma`, `Psi_i(V, t) = sigma + (1 + sigma) t / (2 V B_i)` for `i > 0`.
    SquareRoot,
}

impl std::str::FromStr for ProxyKind {
    type Err = DsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "div" | "division" | "div-prescaled" => Ok(ProxyKind::Division),
            "sqrt" | "square-root" => Ok(ProxyKind::SquareRoot),
            other => Err(DsmError::Parse(format!("unknown operation `{other}`"))),
        }
    }
}

/// `Psi_i` for one algorithm and one radix sequence.
#[derive(Clone, Debug)]
pub struct PsiSpec<S> {
    pub kind: ProxyKind,
    pub sigma: S,
    pub radices: RadixSequence,
}

impl<S: Scalar> PsiSpec<S> {
    pub fn new(kind: ProxyKind, sigma: S, radices: RadixSequence) -> Result<Self> {
        if sigma.is_negative() {
            return Err(DsmError::param("sigma", "must be non-negative"));
        }
        Ok(PsiSpec { kind, sigma, radices })
    }

    /// `[1/4, 1]` for division, `[1/2, 1]` for square root.
    pub fn default_interval(&self) -> (S, S) {
        let quarter = S::half() * S::half();
        match self.kind {
            ProxyKind::Division => (quarter, S::one()),
            ProxyKind::SquareRoot => (S::half(), S::one()),
        }
    }

    /// `Psi_i(u, t)` evaluated pointwise.
    pub fn psi_bound(&self, i: usize, u: &S, t: &S) -> S {
        match (self.kind, i) {
            (ProxyKind::Division, _) | (ProxyKind::SquareRoot, 0) => self.sigma.clone(),
            (ProxyKind::SquareRoot, _) => {
                let b = S::from_integer(self.radices.cumulative(i));
                let two = S::one() + S::one();
                self.sigma.clone() + (S::one() + self.sigma.clone()) * t.clone() / (two * u.clone() * b)
            }
        }
    }

    /// `Phi_i(p)(u) = Psi_i(u, p(u))` as a posynomial.
    pub fn phi(&self, i: usize, p: &Posynomial<S>) -> Posynomial<S> {
        let sigma = Posynomial::constant(self.sigma.clone()).expect("sigma >= 0");
        match (self.kind, i) {
            (ProxyKind::Division, _) | (ProxyKind::SquareRoot, 0) => sigma,
            (ProxyKind::SquareRoot, _) => {
                let two = S::one() + S::one();
                let c = (S::one() + self.sigma.clone()) / (two * S::from_integer(self.radices.cumulative(i)));
                let scaled = p.div_by_nu().scale(&c).expect("positive scale");
                &sigma + &scaled
            }
        }
    }
}

/// `tau_i`, `Phi_i(tau_i)` and `tau_p_i` for one step.
#[derive(Clone, Debug, PartialEq)]
pub struct TauStep<S> {
    pub tau: Posynomial<S>,
    pub phi: Posynomial<S>,
    pub tau_p: Posynomial<S>,
}

/// `tau_0..tau_n` with their proxy bounds; `omegas[i - 1]` is `omega_i`.
pub fn tau_sequence<S: Scalar>(spec: &PsiSpec<S>, omegas: &[S], n: usize) -> Result<Vec<TauStep<S>>> {
    if spec.radices.len() < n {
        return Err(DsmError::ConfigTooShort {
            available: spec.radices.len(),
            requested: n,
        });
    }
    if omegas.len() < n {
        return Err(DsmError::param(
            "omegas",
            format!("{} values given for {n} steps", omegas.len()),
        ));
    }
    if let Some(w) = omegas.iter().find(|w| **w < S::half()) {
        return Err(DsmError::param("omegas", format!("{w:?} is below 1/2")));
    }
    let mut out: Vec<TauStep<S>> = Vec::with_capacity(n + 1);
    let mut tau = Posynomial::identity();
    #[allow(clippy::needless_range_loop)]
    for i in 0..=n {
        let phi = spec.phi(i, &tau);
        let excess = &phi * &tau;
        let tau_p = &tau + &excess;
        let next = if i < n {
            let beta = S::from_integer(&BigInt::from(spec.radices.beta(i + 1)));
            let grown = excess.scale(&beta)?;
            &grown + &Posynomial::constant(omegas[i].clone())?
        } else {
            Posynomial::zero()
        };
        out.push(TauStep { tau, phi, tau_p });
        tau = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{parse_rational, Rational};
    use num_traits::Signed;
    use proptest::prelude::*;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn spec(kind: ProxyKind, sigma: &str, betas: &[u64]) -> PsiSpec<Rational> {
        PsiSpec::new(kind, q(sigma), RadixSequence::new(betas.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn division_tau_one() {
        let s = spec(ProxyKind::Division, "2^-9", &[128]);
        let taus = tau_sequence(&s, &[q("5/8")], 1).unwrap();
        assert_eq!(taus[1].tau, Posynomial::from_terms([(q("1/4"), 1), (q("5/8"), 0)]).unwrap());
        assert_eq!(taus[1].tau.eval(&q("1")).unwrap(), q("7/8"));
        assert_eq!(taus[1].tau.eval(&q("1/4")).unwrap(), q("11/16"));
    }

    #[test]
    fn sqrt_tau_two() {
        let s = spec(ProxyKind::SquareRoot, "2^-9", &[128, 128]);
        let taus = tau_sequence(&s, &[q("5/8"), q("5/8")], 2).unwrap();
        // fractions oracle: tau_2(1/2) = 11273/8192
        assert_eq!(taus[2].tau.eval(&q("1/2")).unwrap(), q("11273/8192"));
        let m = endpoint_max(&taus[2].tau, &q("1/2"), &q("1")).unwrap();
        assert_eq!(m, q("11273/8192"));
        assert!(taus[2].tau.eval(&q("1")).unwrap() < m);
        // Phi_1(tau_1)(1/2)
        assert_eq!(taus[1].phi.eval(&q("1/2")).unwrap(), q("2051/262144"));
    }

    #[test]
    fn phi_structure() {
        let div = spec(ProxyKind::Division, "2^-9", &[128, 32]);
        let sq = spec(ProxyKind::SquareRoot, "2^-9", &[128, 32]);
        let p = Posynomial::from_terms([(q("3"), 2), (q("1/7"), -1)]).unwrap();
        for i in 0..3 {
            assert_eq!(div.phi(i, &p), Posynomial::constant(q("2^-9")).unwrap());
        }
        assert_eq!(sq.phi(0, &p), Posynomial::constant(q("2^-9")).unwrap());
        let c = q("513/512") / q("256");
        let expected = &Posynomial::constant(q("2^-9")).unwrap() + &p.div_by_nu().scale(&c).unwrap();
        assert_eq!(sq.phi(1, &p), expected);
        assert!(sq.phi(2, &p).terms().all(|(_, c)| c.is_positive()));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(PsiSpec::new(ProxyKind::Division, q("-1"), RadixSequence::new(vec![2]).unwrap()).is_err());
        let s = spec(ProxyKind::Division, "0", &[2]);
        assert!(tau_sequence(&s, &[q("1/2")], 2).is_err());
        assert!(tau_sequence(&s, &[], 1).is_err());
        assert!(tau_sequence(&s, &[q("1/4")], 1).is_err());
    }

    #[test]
    fn float_scalar_matches_exact() {
        let exact = spec(ProxyKind::SquareRoot, "2^-9", &[128, 32, 128, 128]);
        let float = PsiSpec::new(ProxyKind::SquareRoot, 1.0f64 / 512.0, exact.radices.clone()).unwrap();
        let te = tau_sequence(&exact, &vec![q("5/8"); 4], 4).unwrap();
        let tf = tau_sequence(&float, &[0.625; 4], 4).unwrap();
        for (e, f) in te.iter().zip(&tf) {
            let ev = e.tau.eval(&q("1/2")).unwrap().as_f64();
            let fv = f.tau.eval(&0.5).unwrap();
            assert!((ev - fv).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn psi_is_monotone(i in 0usize..4, un in 1i64..100, x in 0i64..1000, dx in 0i64..1000, sig in 0i64..64) {
            let sigma = Rational::new(sig.into(), 4096.into());
            for kind in [ProxyKind::Division, ProxyKind::SquareRoot] {
                let s = PsiSpec::new(kind, sigma.clone(), RadixSequence::new(vec![128, 32, 128, 128]).unwrap()).unwrap();
                let u = Rational::new(un.into(), 64.into());
                let lo = Rational::new(x.into(), 256.into());
                let hi = &lo + Rational::new(dx.into(), 256.into());
                prop_assert!(s.psi_bound(i, &u, &lo) <= s.psi_bound(i, &u, &hi));
            }
        }

        #[test]
        fn phi_matches_pointwise_psi(i in 0usize..4, un in 1i64..100) {
            let s = spec(ProxyKind::SquareRoot, "2^-8", &[128, 32, 128, 128]);
            let taus = tau_sequence(&s, &vec![q("9/16"); 4], 4).unwrap();
            let u = Rational::new(un.into(), 64.into());
            let t = taus[i].tau.eval(&u).unwrap();
            prop_assert_eq!(taus[i].phi.eval(&u).unwrap(), s.psi_bound(i, &u, &t));
        }
    }
}
