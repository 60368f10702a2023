//! Polynomial feedback laws `u = sum_i a_i x^{e_i}` and their evaluation.
//!
//! Every term with at least one state factor becomes one product instance
//! with factors `(a_i, x_1 .. x_1, x_2 .. x_2, ...)`. A term with `k` state
//! factors naturally lands at scale `(k+1) x_post`; its coefficient is lifted
//! by `beta^((d-k) x_post)` when the law is quantized so that every summand
//! reaches the common scale `(d+1) x_post` and the collector can add them.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::Session;
use crate::modring::{Fixed, FixedPointFormat, Residue, Ring};
use crate::scheme::MultiplicationScheme;

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

impl Term {
    pub fn new(coefficient: f64, exponents: Vec<u32>) -> Self {
        Self { coefficient, exponents }
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    fn monomial(&self, x: &[f64]) -> f64 {
        self.exponents.iter().zip(x).map(|(&e, &xi)| xi.powi(e as i32)).product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialLaw {
    n_x: usize,
    terms: Vec<Term>,
}

impl PolynomialLaw {
    pub fn new(n_x: usize, terms: Vec<Term>) -> Result<Self> {
        if n_x == 0 {
            return Err(Error::InvalidLaw("state dimension must be positive".into()));
        }
        let mut seen = HashSet::new();
        for t in &terms {
            if t.exponents.len() != n_x {
                return Err(Error::InvalidLaw(format!(
                    "exponent vector {:?} does not have {n_x} entries",
                    t.exponents
                )));
            }
            if !t.coefficient.is_finite() {
                return Err(Error::NonFinite(t.coefficient));
            }
            if !seen.insert(t.exponents.clone()) {
                return Err(Error::InvalidLaw(format!("duplicate monomial {:?}", t.exponents)));
            }
        }
        let law = Self { n_x, terms };
        if law.degree() == 0 {
            return Err(Error::InvalidLaw("degree must be at least 1".into()));
        }
        Ok(law)
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(Term::degree).max().unwrap_or(0)
    }

    pub fn evaluate_real(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.coefficient * t.monomial(x)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedTerm {
    pub coefficient: Fixed,
    /// Encoded coefficient, already lifted so the term ends at the target scale.
    pub encoded: Residue,
    pub exponents: Vec<u32>,
}

impl QuantizedTerm {
    pub fn state_factors(&self) -> usize {
        self.exponents.iter().sum::<u32>() as usize
    }

    /// Factor list of the product instance: coefficient, then each state
    /// index repeated by its exponent.
    pub fn factor_sources(&self) -> Vec<FactorSource> {
        let mut f = vec![FactorSource::Coefficient];
        for (i, &e) in self.exponents.iter().enumerate() {
            f.extend(std::iter::repeat_n(FactorSource::State(i), e as usize));
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedLaw {
    format: FixedPointFormat,
    n_x: usize,
    degree: u32,
    terms: Vec<QuantizedTerm>,
    warnings: Vec<String>,
}

impl QuantizedLaw {
    pub fn format(&self) -> &FixedPointFormat {
        &self.format
    }

    pub fn ring(&self) -> Ring {
        self.format.ring()
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn terms(&self) -> &[QuantizedTerm] {
        &self.terms
    }

    /// Saturated coefficients, if any.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn target_scale(&self) -> u32 {
        (self.degree + 1) * self.format.x_post()
    }

    /// Real value of a collector output.
    pub fn decode(&self, u: Residue) -> f64 {
        self.format.decode(u)
    }
}

pub fn quantize_law(law: &PolynomialLaw, fmt: &FixedPointFormat) -> Result<QuantizedLaw> {
    let d = law.degree();
    if d > fmt.degree() {
        return Err(Error::InvalidLaw(format!("law degree {d} exceeds the format's degree {}", fmt.degree())));
    }
    let ring = fmt.ring();
    let x_post = fmt.x_post();
    let mut warnings = Vec::new();
    let mut terms = Vec::with_capacity(law.terms.len());
    for t in &law.terms {
        let coefficient = fmt.quantize(t.coefficient)?;
        if t.coefficient.abs() >= fmt.q_sat() - fmt.delta() {
            warnings.push(format!(
                "coefficient {} of {:?} saturates to {}",
                t.coefficient,
                t.exponents,
                coefficient.to_f64()
            ));
        }
        let k = t.degree();
        let encoded = ring.rescale(fmt.encode(coefficient), x_post + (d - k) * x_post)?;
        terms.push(QuantizedTerm { coefficient, encoded, exponents: t.exponents.clone() });
    }
    Ok(QuantizedLaw { format: *fmt, n_x: law.n_x, degree: d, terms, warnings })
}

/// Quantizes and encodes a measured state at scale `x_post`.
pub fn encode_state(x: &[f64], fmt: &FixedPointFormat) -> Result<Vec<Residue>> {
    x.iter().map(|&xi| Ok(fmt.encode(fmt.quantize(xi)?))).collect()
}

fn check_state(qlaw: &QuantizedLaw, state: &[Residue]) -> Result<()> {
    if state.len() != qlaw.n_x {
        return Err(Error::ComponentCount { expected: qlaw.n_x, found: state.len() });
    }
    let ring = qlaw.ring();
    for r in state {
        ring.check(*r)?;
        if r.scale != qlaw.format.x_post() {
            return Err(Error::ScaleMismatch { left: qlaw.format.x_post(), right: r.scale });
        }
    }
    Ok(())
}

/// The exactness oracle: same fixed-point arithmetic, no sharing.
pub fn evaluate_plaintext(qlaw: &QuantizedLaw, state: &[Residue]) -> Result<Residue> {
    check_state(qlaw, state)?;
    let ring = qlaw.ring();
    let mut u = Residue::zero(qlaw.target_scale());
    for t in &qlaw.terms {
        let mut acc = t.encoded;
        for (i, &e) in t.exponents.iter().enumerate() {
            for _ in 0..e {
                acc = ring.mul(acc, state[i]);
            }
        }
        u = ring.add(u, acc)?;
    }
    Ok(u)
}

/// Bound on `|decode(evaluate_plaintext(q(x))) - p(x)|` for `|x_i| <= radius`.
///
/// Per term, `|c' m' - c m| <= |c' - c| |m'| + |c| |m' - m|` with
/// `|c' - c|, |x'_i - x_i| <= Delta/2`, so `|m'| <= (R + Delta/2)^k` and
/// `|m' - m| <= (R + Delta/2)^k - R^k`.
pub fn drift_bound(law: &PolynomialLaw, fmt: &FixedPointFormat, radius: f64) -> f64 {
    let h = fmt.delta() / 2.0;
    law.terms
        .iter()
        .map(|t| {
            let k = t.degree() as i32;
            let grown = (radius + h).powi(k);
            h * grown + t.coefficient.abs() * (grown - radius.powi(k))
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstantMode {
    /// The constant term goes straight to the collector.
    #[default]
    Direct,
    /// The constant is split additively over the servers of one instance.
    Shared,
}

impl ConstantMode {
    pub fn name(&self) -> &'static str {
        match self {
            ConstantMode::Direct => "direct",
            ConstantMode::Shared => "shared",
        }
    }
}

impl fmt::Display for ConstantMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConstantMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(ConstantMode::Direct),
            "shared" => Ok(ConstantMode::Shared),
            other => Err(Error::UnknownStrategy { kind: "constant mode", name: other.into() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorSource {
    Coefficient,
    State(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SummandInstance {
    /// Index of the term in the quantized law; doubles as the wire summand id.
    pub summand: u16,
    pub coefficient: Residue,
    pub factors: Vec<FactorSource>,
    /// Pool indices of the participating servers, by local index.
    pub servers: Vec<usize>,
}

impl SummandInstance {
    pub fn resolve(&self, state: &[Residue]) -> Vec<Residue> {
        self.factors
            .iter()
            .map(|f| match f {
                FactorSource::Coefficient => self.coefficient,
                FactorSource::State(i) => state[*i],
            })
            .collect()
    }

    pub fn local_index(&self, server: usize) -> Option<usize> {
        self.servers.iter().position(|&s| s == server)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationPlan {
    pub scheme: &'static str,
    pub pool_size: usize,
    pub instances: Vec<SummandInstance>,
    /// Constant term at the target scale, if the law has one.
    pub constant: Option<Residue>,
    pub constant_mode: ConstantMode,
    pub target_scale: u32,
    pub degree: u32,
    pub n_x: usize,
    pub ring: Ring,
    /// Position in `instances` of the instance that carries shared constant
    /// pieces: the first one with the most factors.
    pub carrier: usize,
}

impl EvaluationPlan {
    pub fn instance(&self, summand: u16) -> Option<&SummandInstance> {
        self.instances.iter().find(|i| i.summand == summand)
    }

    pub fn carries_constant(&self, summand: u16) -> bool {
        self.constant_mode == ConstantMode::Shared
            && self.constant.is_some()
            && self.instances[self.carrier].summand == summand
    }

    pub fn validate(&self, scheme: &dyn MultiplicationScheme) -> Result<()> {
        if scheme.name() != self.scheme || scheme.pool_size(self.degree) != self.pool_size {
            return Err(Error::Session(format!("plan was made for the {} scheme", self.scheme)));
        }
        let mut ids = HashSet::new();
        for inst in &self.instances {
            let f = inst.factors.len();
            if f < 2 || f > self.degree as usize + 1 {
                return Err(Error::protocol(inst.summand, format!("{f} factors for degree {}", self.degree)));
            }
            if !ids.insert(inst.summand) {
                return Err(Error::protocol(inst.summand, "summand id used twice"));
            }
            if inst.servers.len() != scheme.parties_for(f) {
                return Err(Error::protocol(inst.summand, "wrong number of servers"));
            }
            // one local role per server: nobody holds two views of one sharing
            let distinct: HashSet<_> = inst.servers.iter().collect();
            if distinct.len() != inst.servers.len() || inst.servers.iter().any(|&s| s >= self.pool_size) {
                return Err(Error::protocol(inst.summand, "servers must be distinct members of the pool"));
            }
            if inst.factors.iter().any(|s| matches!(s, FactorSource::State(i) if *i >= self.n_x)) {
                return Err(Error::protocol(inst.summand, "state index out of range"));
            }
        }
        if self.instances.is_empty() || self.carrier >= self.instances.len() {
            return Err(Error::Session("plan has no product instances".into()));
        }
        Ok(())
    }
}

pub fn plan_evaluation(
    qlaw: &QuantizedLaw,
    scheme: &dyn MultiplicationScheme,
    constant_mode: ConstantMode,
) -> Result<EvaluationPlan> {
    let ring = qlaw.ring();
    let mut instances = Vec::new();
    let mut constant = None;
    for (i, t) in qlaw.terms.iter().enumerate() {
        let summand = u16::try_from(i).map_err(|_| Error::InvalidLaw("too many terms".into()))?;
        if t.state_factors() == 0 {
            constant = Some(t.encoded);
            continue;
        }
        let factors = t.factor_sources();
        let servers = (0..scheme.parties_for(factors.len())).collect();
        instances.push(SummandInstance { summand, coefficient: t.encoded, factors, servers });
    }
    let longest = instances.iter().map(|i| i.factors.len()).max().unwrap_or(0);
    let carrier = instances.iter().position(|i| i.factors.len() == longest).unwrap_or(0);
    let plan = EvaluationPlan {
        scheme: scheme.name(),
        pool_size: scheme.pool_size(qlaw.degree),
        instances,
        constant,
        constant_mode,
        target_scale: qlaw.target_scale(),
        degree: qlaw.degree,
        n_x: qlaw.n_x,
        ring,
        carrier,
    };
    plan.validate(scheme)?;
    Ok(plan)
}

/// Runs one control step through `session` and returns `u` at the target
/// scale.
pub fn evaluate_secure(qlaw: &QuantizedLaw, session: &mut Session, state: &[Residue]) -> Result<Residue> {
    check_state(qlaw, state)?;
    let u = session.run_step(state)?;
    if u.scale != qlaw.target_scale() {
        return Err(Error::ScaleMismatch { left: qlaw.target_scale(), right: u.scale });
    }
    Ok(u)
}
