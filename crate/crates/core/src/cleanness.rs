//! Cleanness contexts, the HyperSTL and self-composed STL cleanness formulas, and
//! brute-force oracles that check the cleanness definitions by enumeration.

use serde::Serialize;
use thiserror::Error;

use crate::logic::{EvalResult, Formula, HyperFormula, LogicError, Projection, Quantifier, Term};
use crate::piecewise::PiecewiseLinear;
use crate::traces::{Distance, EqConfig, Trace};

#[derive(Debug, Error)]
pub enum CleannessError {
    #[error("standard behaviour must contain at least one trace")]
    EmptyStd,
    #[error("standard trace {0} differs in horizon or kind from the first one")]
    IncoherentStd(usize),
    #[error("standard trace {0} is not a trace of the system")]
    StdNotInSystem(usize),
    #[error("system trace {0} has a different horizon than the standard behaviour")]
    HorizonMismatch(usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

/// The lower (`l-`) or upper (`u-`) clause of a cleanness definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Clause {
    Lower,
    Upper,
}

/// Shared view of robust and func contexts.
pub trait CleannessContext {
    fn std(&self) -> &[Trace];
    fn d_in(&self) -> &Distance;
    fn d_out(&self) -> &Distance;
    fn eq(&self) -> &EqConfig;

    /// Output tube between variables `s` and `x`, as used inside the cleanness formulas.
    fn tube(&self, s: usize, x: usize) -> Formula;

    /// First step at which the tube between the pairs `(in_a, in_b)` and `(out_a, out_b)`
    /// is left, if any.
    fn first_failure(
        &self,
        in_a: &Trace,
        in_b: &Trace,
        out_a: &Trace,
        out_b: &Trace,
    ) -> Option<usize>;
}

fn check_std(std: &[Trace]) -> Result<(), CleannessError> {
    let first = std.first().ok_or(CleannessError::EmptyStd)?;
    for (k, w) in std.iter().enumerate() {
        if w.horizon() != first.horizon() || w.kind() != first.kind() {
            return Err(CleannessError::IncoherentStd(k));
        }
    }
    Ok(())
}

fn check_kappa(name: &str, k: f64) -> Result<(), CleannessError> {
    if k.is_nan() || k < 0.0 {
        return Err(CleannessError::Parameter(format!(
            "{name} must be a non-negative extended real, got {k}"
        )));
    }
    Ok(())
}

fn check_distances(d_in: &Distance, d_out: &Distance) -> Result<(), CleannessError> {
    d_in.validate().map_err(CleannessError::Parameter)?;
    d_out.validate().map_err(CleannessError::Parameter)
}

fn d_out_term(d: &Distance, s: usize, x: usize) -> Term {
    Term::dist(d.clone(), Projection::Output, s, x)
}

fn d_in_term(d: &Distance, s: usize, x: usize) -> Term {
    Term::dist(d.clone(), Projection::Input, s, x)
}

fn io_at(a: &Trace, b: &Trace, k: usize, d: &Distance, input: bool) -> f64 {
    if input {
        d.between(&a.at(k).input_part(), &b.at(k).input_part())
    } else {
        d.between(&a.at(k).output_part(), &b.at(k).output_part())
    }
}

/// `⟨Std, dIn, dOut, κi, κo⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustContext {
    pub std: Vec<Trace>,
    pub d_in: Distance,
    pub d_out: Distance,
    pub kappa_in: f64,
    pub kappa_out: f64,
    pub eq: EqConfig,
}

impl RobustContext {
    pub fn new(
        std: Vec<Trace>,
        d_in: Distance,
        d_out: Distance,
        kappa_in: f64,
        kappa_out: f64,
        eq: EqConfig,
    ) -> Result<Self, CleannessError> {
        check_std(&std)?;
        check_kappa("kappa_in", kappa_in)?;
        check_kappa("kappa_out", kappa_out)?;
        check_distances(&d_in, &d_out)?;
        Ok(RobustContext {
            std,
            d_in,
            d_out,
            kappa_in,
            kappa_out,
            eq,
        })
    }
}

impl CleannessContext for RobustContext {
    fn std(&self) -> &[Trace] {
        &self.std
    }
    fn d_in(&self) -> &Distance {
        &self.d_in
    }
    fn d_out(&self) -> &Distance {
        &self.d_out
    }
    fn eq(&self) -> &EqConfig {
        &self.eq
    }

    /// `(dOut(out s, out x) − κo ≤ 0) W (dIn(in s, in x) − κi > 0)`.
    fn tube(&self, s: usize, x: usize) -> Formula {
        let out_ok = Formula::le0(Term::sub(
            d_out_term(&self.d_out, s, x),
            Term::Const(self.kappa_out),
        ));
        let in_far = Formula::gt0(Term::sub(
            d_in_term(&self.d_in, s, x),
            Term::Const(self.kappa_in),
        ));
        Formula::weak_until(out_ok, in_far)
    }

    fn first_failure(
        &self,
        in_a: &Trace,
        in_b: &Trace,
        out_a: &Trace,
        out_b: &Trace,
    ) -> Option<usize> {
        for k in 0..in_a.horizon() {
            if io_at(in_a, in_b, k, &self.d_in, true) > self.kappa_in {
                return None;
            }
            if io_at(out_a, out_b, k, &self.d_out, false) > self.kappa_out {
                return Some(k);
            }
        }
        None
    }
}

/// `⟨Std, dIn, dOut, f⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct FuncContext {
    pub std: Vec<Trace>,
    pub d_in: Distance,
    pub d_out: Distance,
    pub f: PiecewiseLinear,
    pub eq: EqConfig,
}

impl FuncContext {
    pub fn new(
        std: Vec<Trace>,
        d_in: Distance,
        d_out: Distance,
        f: PiecewiseLinear,
        eq: EqConfig,
    ) -> Result<Self, CleannessError> {
        check_std(&std)?;
        check_distances(&d_in, &d_out)?;
        Ok(FuncContext {
            std,
            d_in,
            d_out,
            f,
            eq,
        })
    }
}

impl CleannessContext for FuncContext {
    fn std(&self) -> &[Trace] {
        &self.std
    }
    fn d_in(&self) -> &Distance {
        &self.d_in
    }
    fn d_out(&self) -> &Distance {
        &self.d_out
    }
    fn eq(&self) -> &EqConfig {
        &self.eq
    }

    /// `□(dOut(out s, out x) − f(dIn(in s, in x)) ≤ 0)`.
    fn tube(&self, s: usize, x: usize) -> Formula {
        Formula::globally(Formula::le0(Term::sub(
            d_out_term(&self.d_out, s, x),
            Term::apply(self.f.clone(), d_in_term(&self.d_in, s, x)),
        )))
    }

    fn first_failure(
        &self,
        in_a: &Trace,
        in_b: &Trace,
        out_a: &Trace,
        out_b: &Trace,
    ) -> Option<usize> {
        (0..in_a.horizon()).find(|&k| {
            let bound = self.f.eval(io_at(in_a, in_b, k, &self.d_in, true));
            io_at(out_a, out_b, k, &self.d_out, false) > bound
        })
    }
}

/// Whether the upper-clause formula requires the existential witness to be standard.
/// The context form keeps the `Std` conjunct; the contract form drops it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StdForm {
    #[default]
    Context,
    Contract,
}

fn std_member(ctx: &impl CleannessContext, var: usize) -> Formula {
    Formula::gt0(Term::StdMember {
        var,
        std: ctx.std().to_vec(),
    })
}

fn same_inputs(ctx: &impl CleannessContext, a: usize, b: usize) -> Formula {
    Formula::globally(Formula::le0(Term::Eq {
        cfg: ctx.eq().clone(),
        a,
        b,
    }))
}

/// The three-quantifier HyperSTL cleanness formula.
///
/// Lower clause: `∀π1 ∀π2 ∃π'2. Std(π1) → (□ eq(in π2, in π'2) ≤ 0 ∧ tube(π1, π'2))`.
/// Upper clause: `∀π1 ∀π2 ∃π'1. Std(π1) → (Std(π'1) ∧ □ eq(in π1, in π'1) ≤ 0 ∧ tube(π'1, π2))`.
/// Variables are numbered in prefix order, so the witness is variable 2.
pub fn build_psi(ctx: &impl CleannessContext, clause: Clause, form: StdForm) -> HyperFormula {
    use Quantifier::*;
    let body = match clause {
        Clause::Lower => Formula::implies(
            std_member(ctx, 0),
            Formula::and(same_inputs(ctx, 1, 2), ctx.tube(0, 2)),
        ),
        Clause::Upper => {
            let mut parts = Vec::new();
            if form == StdForm::Context {
                parts.push(std_member(ctx, 2));
            }
            parts.push(same_inputs(ctx, 0, 2));
            parts.push(ctx.tube(2, 1));
            Formula::implies(std_member(ctx, 0), Formula::all(parts))
        }
    };
    HyperFormula::new(vec![Forall, Forall, Exists], body).expect("variables 0..3 are bound")
}

/// A subject trace followed by the standard traces in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedTrace {
    components: Vec<Trace>,
}

impl ComposedTrace {
    pub fn new(subject: Trace, standards: &[Trace]) -> Result<Self, CleannessError> {
        check_std(standards)?;
        if subject.horizon() != standards[0].horizon() {
            return Err(CleannessError::HorizonMismatch(0));
        }
        let mut components = vec![subject];
        components.extend(standards.iter().cloned());
        Ok(ComposedTrace { components })
    }

    pub fn subject(&self) -> &Trace {
        &self.components[0]
    }

    pub fn standards(&self) -> &[Trace] {
        &self.components[1..]
    }

    /// Variable 0 is the subject, variable `k ≥ 1` the `k`-th standard trace.
    pub fn components(&self) -> Vec<&Trace> {
        self.components.iter().collect()
    }

    pub fn evaluate(&self, phi: &Formula) -> Result<EvalResult, CleannessError> {
        Ok(phi.evaluate(&self.components(), 0)?)
    }
}

/// `S ∘ Std`: one composed trace per system trace.
pub fn self_compose(system: &[Trace], std: &[Trace]) -> Result<Vec<ComposedTrace>, CleannessError> {
    system
        .iter()
        .enumerate()
        .map(|(k, w)| {
            ComposedTrace::new(w.clone(), std).map_err(|e| match e {
                CleannessError::HorizonMismatch(_) => CleannessError::HorizonMismatch(k),
                other => other,
            })
        })
        .collect()
}

/// Upper-clause STL formula over composed traces:
/// `⋀_a ⋁_b (□ eq(in w_a, in w_b) ≤ 0 ∧ tube(w_b, w))`.
pub fn build_phi(ctx: &impl CleannessContext) -> Formula {
    let c = ctx.std().len();
    Formula::all(
        (1..=c)
            .map(|a| {
                Formula::any(
                    (1..=c)
                        .map(|b| Formula::and(same_inputs(ctx, a, b), ctx.tube(b, 0)))
                        .collect(),
                )
            })
            .collect(),
    )
}

/// Evaluates the composed-trace formula on `(w, Std)`.
pub fn evaluate_phi(ctx: &impl CleannessContext, w: &Trace) -> Result<EvalResult, CleannessError> {
    ComposedTrace::new(w.clone(), ctx.std())?.evaluate(&build_phi(ctx))
}

/// A violated clause: for the standard trace `standard` and the system trace `other`,
/// every candidate leaves the tube. `closest` is the candidate that stays inside longest
/// (first in enumeration order on ties) and `time` the step where it leaves. For the
/// upper clause `closest` indexes the standard list, for the lower clause the system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub clause: Clause,
    pub standard: usize,
    pub other: usize,
    pub closest: Option<usize>,
    pub time: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleReport {
    pub lower: Option<Violation>,
    pub upper: Option<Violation>,
}

impl OracleReport {
    pub fn is_clean(&self) -> bool {
        self.lower.is_none() && self.upper.is_none()
    }

    pub fn clause(&self, c: Clause) -> Option<&Violation> {
        match c {
            Clause::Lower => self.lower.as_ref(),
            Clause::Upper => self.upper.as_ref(),
        }
    }
}

fn inputs_of(w: &Trace) -> Vec<crate::traces::Value> {
    w.values().iter().map(|v| v.input_part()).collect()
}

/// Checks both clauses of the cleanness definition by enumerating every
/// `(σ ∈ Std, σ' ∈ S)` pair and every candidate `σ''`.
pub fn oracle(
    system: &[Trace],
    ctx: &impl CleannessContext,
) -> Result<OracleReport, CleannessError> {
    let std = ctx.std();
    for (k, s) in std.iter().enumerate() {
        if !system.contains(s) {
            return Err(CleannessError::StdNotInSystem(k));
        }
    }
    let horizon = std[0].horizon();
    if let Some(k) = system.iter().position(|w| w.horizon() != horizon) {
        return Err(CleannessError::HorizonMismatch(k));
    }
    let sys_in: Vec<_> = system.iter().map(inputs_of).collect();
    let std_in: Vec<_> = std.iter().map(inputs_of).collect();

    let mut lower = None;
    let mut upper = None;
    for (si, sigma) in std.iter().enumerate() {
        for (oi, other) in system.iter().enumerate() {
            if lower.is_none() {
                // σ'' ∈ S with in σ'' = in σ'; outputs of σ against σ''
                let cands = (0..system.len()).filter(|&c| sys_in[c] == sys_in[oi]);
                lower = pick_violation(cands, |c| {
                    ctx.first_failure(sigma, other, sigma, &system[c])
                })
                .map(|(closest, time)| Violation {
                    clause: Clause::Lower,
                    standard: si,
                    other: oi,
                    closest,
                    time,
                });
            }
            if upper.is_none() {
                // σ'' ∈ Std with in σ'' = in σ; outputs of σ' against σ''
                let cands = (0..std.len()).filter(|&c| std_in[c] == std_in[si]);
                upper = pick_violation(cands, |c| ctx.first_failure(sigma, other, other, &std[c]))
                    .map(|(closest, time)| Violation {
                        clause: Clause::Upper,
                        standard: si,
                        other: oi,
                        closest,
                        time,
                    });
            }
        }
    }
    Ok(OracleReport { lower, upper })
}

/// `None` if some candidate never fails; otherwise the latest-failing candidate.
fn pick_violation(
    cands: impl Iterator<Item = usize>,
    mut fails_at: impl FnMut(usize) -> Option<usize>,
) -> Option<(Option<usize>, Option<usize>)> {
    let mut best: Option<(usize, usize)> = None;
    for c in cands {
        let t = fails_at(c)?;
        if best.is_none_or(|(_, bt)| t > bt) {
            best = Some((c, t));
        }
    }
    Some(match best {
        Some((c, t)) => (Some(c), Some(t)),
        None => (None, None),
    })
}

/// Counterexample to deterministic func-cleanness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetViolation {
    pub standard: usize,
    pub other: usize,
    pub d_out: f64,
    pub bound: f64,
}

/// Checks `dOut(P(i), P(i')) ≤ f(dIn(i, i'))` for every standard input `i` and every
/// grid input `i'`; returns the first failing pair in enumeration order.
pub fn oracle_func_clean_det<P>(
    p: P,
    std_in: &[Vec<f64>],
    grid: &[Vec<f64>],
    d_in: &Distance,
    d_out: &Distance,
    f: &PiecewiseLinear,
) -> Option<DetViolation>
where
    P: Fn(&[f64]) -> f64,
{
    let grid_out: Vec<f64> = grid.iter().map(|i| p(i)).collect();
    for (si, i) in std_in.iter().enumerate() {
        let pi = p(i);
        for (gi, j) in grid.iter().enumerate() {
            let lhs = d_out.between_scalars(pi, grid_out[gi]);
            let bound = f.eval(d_in.between_vectors(i, j));
            if lhs > bound {
                return Some(DetViolation {
                    standard: si,
                    other: gi,
                    d_out: lhs,
                    bound,
                });
            }
        }
    }
    None
}
