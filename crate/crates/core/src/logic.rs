//! STL and HyperSTL over finite discrete traces.
//!
//! Formulas are evaluated bottom-up as signals over the whole horizon. Until uses the
//! backward recursion `U(t) = max(ψ(t), min(φ(t), U(t+1)))` with `U(B) = -∞`, so an Until
//! without a witness before the horizon is false. Boolean and quantitative semantics are
//! computed separately; only the sign of a non-zero robustness is tied to the Boolean value.

use std::fmt;

use thiserror::Error;

use crate::ext;
use crate::piecewise::PiecewiseLinear;
use crate::traces::{Distance, EqConfig, Trace, Value};

#[derive(Debug, Error, PartialEq)]
pub enum LogicError {
    #[error("time {t} outside horizon {horizon}")]
    TimeOutOfRange { t: usize, horizon: usize },
    #[error("traces must share one horizon, got {0:?}")]
    HorizonMismatch(Vec<usize>),
    #[error("term uses variable {var} but only {bound} are bound")]
    UnboundVariable { var: usize, bound: usize },
    #[error("no traces to evaluate over")]
    NoTraces,
}

/// Which side of a symbol a distance term compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Input,
    Output,
    Raw,
}

impl Projection {
    fn apply(self, v: &Value) -> Value {
        match self {
            Projection::Input => v.input_part(),
            Projection::Output => v.output_part(),
            Projection::Raw => v.clone(),
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Projection::Input => "in ",
            Projection::Output => "out ",
            Projection::Raw => "",
        }
    }
}

/// Closed real-valued expression over the values of the bound trace variables at one
/// time step. Variables are indices into the evaluation's trace slice.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Const(f64),
    /// Component `index` of the symbol: vector entry, pair input (0) or output (1), or the
    /// scalar of an input/output. Quiescence and masks read as `-∞`.
    Component {
        var: usize,
        index: usize,
    },
    Distance {
        metric: Distance,
        projection: Projection,
        a: usize,
        b: usize,
    },
    /// `eq(in a, in b)`.
    Eq {
        cfg: EqConfig,
        a: usize,
        b: usize,
    },
    Add(Box<Term>, Box<Term>),
    /// Difference with `∞ - ∞ = 0`.
    Sub(Box<Term>, Box<Term>),
    Scale(f64, Box<Term>),
    Apply(PiecewiseLinear, Box<Term>),
    /// `+1` if the whole trace equals a listed trace, `-1` otherwise.
    StdMember {
        var: usize,
        std: Vec<Trace>,
    },
}

impl Term {
    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Term, b: Term) -> Term {
        Term::Sub(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Term, b: Term) -> Term {
        Term::Add(Box::new(a), Box::new(b))
    }

    pub fn apply(f: PiecewiseLinear, arg: Term) -> Term {
        Term::Apply(f, Box::new(arg))
    }

    pub fn dist(metric: Distance, projection: Projection, a: usize, b: usize) -> Term {
        Term::Distance {
            metric,
            projection,
            a,
            b,
        }
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            Term::Const(_) => None,
            Term::Component { var, .. } | Term::StdMember { var, .. } => Some(*var),
            Term::Distance { a, b, .. } | Term::Eq { a, b, .. } => Some(*a.max(b)),
            Term::Add(x, y) | Term::Sub(x, y) => x.max_var().max(y.max_var()),
            Term::Scale(_, x) | Term::Apply(_, x) => x.max_var(),
        }
    }

    pub fn eval(&self, traces: &[&Trace], t: usize) -> f64 {
        match self {
            Term::Const(c) => *c,
            Term::Component { var, index } => component(traces[*var].at(t), *index),
            Term::Distance {
                metric,
                projection,
                a,
                b,
            } => metric.between(
                &projection.apply(traces[*a].at(t)),
                &projection.apply(traces[*b].at(t)),
            ),
            Term::Eq { cfg, a, b } => cfg.measure(
                &traces[*a].at(t).input_part(),
                &traces[*b].at(t).input_part(),
            ),
            Term::Add(x, y) => ext::sub(x.eval(traces, t), -y.eval(traces, t)),
            Term::Sub(x, y) => ext::sub(x.eval(traces, t), y.eval(traces, t)),
            Term::Scale(k, x) => {
                let v = x.eval(traces, t);
                if *k == 0.0 {
                    0.0
                } else {
                    k * v
                }
            }
            Term::Apply(f, x) => f.eval(x.eval(traces, t)),
            Term::StdMember { var, std } => {
                if std.iter().any(|s| s == traces[*var]) {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

fn component(v: &Value, index: usize) -> f64 {
    match (v, index) {
        (Value::RealVec(xs), k) if k < xs.len() => xs[k],
        (Value::Pair { input, .. }, 0) => *input,
        (Value::Pair { output, .. }, 1) => *output,
        (Value::In(x) | Value::Out(x), 0) => *x,
        _ => f64::NEG_INFINITY,
    }
}

fn var_name(v: usize) -> String {
    format!("x{v}")
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => f.write_str(&ext::render(*c)),
            Term::Component { var, index } => write!(f, "{}[{index}]", var_name(*var)),
            Term::Distance {
                metric,
                projection,
                a,
                b,
            } => {
                let name = match metric {
                    Distance::MixedIn => "d_in",
                    Distance::MixedOut => "d_out",
                    Distance::AbsScalar => "d_abs",
                    Distance::EuclidNormalized { .. } => "d_euclid",
                    Distance::CustomTable { .. } => "d_table",
                };
                let p = projection.tag();
                write!(f, "{name}({p}{}, {p}{})", var_name(*a), var_name(*b))
            }
            Term::Eq { a, b, .. } => write!(f, "eq(in {}, in {})", var_name(*a), var_name(*b)),
            Term::Add(x, y) => write!(f, "({x} + {y})"),
            Term::Sub(x, y) => write!(f, "({x} - {y})"),
            Term::Scale(k, x) => write!(f, "({k} * {x})"),
            Term::Apply(_, x) => write!(f, "f({x})"),
            Term::StdMember { var, .. } => write!(f, "std({})", var_name(*var)),
        }
    }
}

/// STL formula. Derived operators are built by the associated constructors and expand
/// into the five core nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    Top,
    Threshold { term: Term, label: Option<String> },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
}

impl Formula {
    /// `term > 0`.
    pub fn gt0(term: Term) -> Formula {
        Formula::Threshold { term, label: None }
    }

    /// `term ≤ 0`, i.e. `¬(term > 0)`.
    pub fn le0(term: Term) -> Formula {
        Formula::not(Formula::gt0(term))
    }

    pub fn labelled(term: Term, label: &str) -> Formula {
        Formula::Threshold {
            term,
            label: Some(label.to_string()),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Formula) -> Formula {
        Formula::Not(Box::new(a))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::not(Formula::and(Formula::not(a), Formula::not(b)))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::or(Formula::not(a), b)
    }

    pub fn until(a: Formula, b: Formula) -> Formula {
        Formula::Until(Box::new(a), Box::new(b))
    }

    /// `◇φ ≡ ⊤ U φ`.
    pub fn finally(a: Formula) -> Formula {
        Formula::until(Formula::Top, a)
    }

    /// `□φ ≡ ¬◇¬φ`.
    pub fn globally(a: Formula) -> Formula {
        Formula::not(Formula::finally(Formula::not(a)))
    }

    /// `φ W ψ ≡ (φ U ψ) ∨ □φ`.
    pub fn weak_until(a: Formula, b: Formula) -> Formula {
        Formula::or(Formula::until(a.clone(), b), Formula::globally(a))
    }

    /// Conjunction of a non-empty list, `⊤` for an empty one.
    pub fn all(items: Vec<Formula>) -> Formula {
        items
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::Top)
    }

    /// Disjunction of a list, `¬⊤` for an empty one.
    pub fn any(items: Vec<Formula>) -> Formula {
        items
            .into_iter()
            .reduce(Formula::or)
            .unwrap_or_else(|| Formula::not(Formula::Top))
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            Formula::Top => None,
            Formula::Threshold { term, .. } => term.max_var(),
            Formula::Not(a) => a.max_var(),
            Formula::And(a, b) | Formula::Until(a, b) => a.max_var().max(b.max_var()),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::Top | Formula::Threshold { .. } => 1,
            Formula::Not(a) => 1 + a.size(),
            Formula::And(a, b) | Formula::Until(a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Boolean and robustness signals over the full horizon.
    fn signals(&self, traces: &[&Trace], horizon: usize) -> (Vec<bool>, Vec<f64>) {
        match self {
            Formula::Top => (vec![true; horizon], vec![f64::INFINITY; horizon]),
            Formula::Threshold { term, .. } => {
                let rho: Vec<f64> = (0..horizon).map(|t| term.eval(traces, t)).collect();
                (rho.iter().map(|&r| r > 0.0).collect(), rho)
            }
            Formula::Not(a) => {
                let (b, r) = a.signals(traces, horizon);
                (
                    b.into_iter().map(|x| !x).collect(),
                    r.into_iter().map(|x| -x).collect(),
                )
            }
            Formula::And(a, c) => {
                let (ba, ra) = a.signals(traces, horizon);
                let (bc, rc) = c.signals(traces, horizon);
                (
                    ba.iter().zip(&bc).map(|(x, y)| *x && *y).collect(),
                    ra.iter().zip(&rc).map(|(x, y)| x.min(*y)).collect(),
                )
            }
            Formula::Until(a, c) => {
                let (ba, ra) = a.signals(traces, horizon);
                let (bc, rc) = c.signals(traces, horizon);
                let mut bu = vec![false; horizon];
                let mut ru = vec![f64::NEG_INFINITY; horizon];
                let (mut nb, mut nr) = (false, f64::NEG_INFINITY);
                for t in (0..horizon).rev() {
                    nb = bc[t] || (ba[t] && nb);
                    nr = rc[t].max(ra[t].min(nr));
                    bu[t] = nb;
                    ru[t] = nr;
                }
                (bu, ru)
            }
        }
    }

    /// Evaluates over a tuple of traces (variable `k` is `traces[k]`) at time `t`.
    pub fn evaluate(&self, traces: &[&Trace], t: usize) -> Result<EvalResult, LogicError> {
        let horizon = common_horizon(traces)?;
        if t >= horizon {
            return Err(LogicError::TimeOutOfRange { t, horizon });
        }
        if let Some(v) = self.max_var() {
            if v >= traces.len() {
                return Err(LogicError::UnboundVariable {
                    var: v,
                    bound: traces.len(),
                });
            }
        }
        let (b, r) = self.signals(traces, horizon);
        Ok(EvalResult {
            boolean: b[t],
            robustness: r[t],
        })
    }

    pub fn eval_bool(&self, w: &Trace, t: usize) -> Result<bool, LogicError> {
        Ok(self.evaluate(&[w], t)?.boolean)
    }

    pub fn eval_quant(&self, w: &Trace, t: usize) -> Result<f64, LogicError> {
        Ok(self.evaluate(&[w], t)?.robustness)
    }
}

fn common_horizon(traces: &[&Trace]) -> Result<usize, LogicError> {
    let first = traces.first().ok_or(LogicError::NoTraces)?.horizon();
    if traces.iter().any(|w| w.horizon() != first) {
        return Err(LogicError::HorizonMismatch(
            traces.iter().map(|w| w.horizon()).collect(),
        ));
    }
    Ok(first)
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Top => f.write_str("true"),
            Formula::Threshold { label: Some(l), .. } => f.write_str(l),
            Formula::Threshold { term, label: None } => write!(f, "({term} > 0)"),
            Formula::Not(a) => write!(f, "(! {a})"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Until(a, b) => write!(f, "({a} U {b})"),
        }
    }
}

/// Truth value and robustness of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub boolean: bool,
    pub robustness: f64,
}

impl EvalResult {
    /// `Some(truth)` when the robustness sign decides it, `None` at `ρ = 0`.
    pub fn conclusive(&self) -> Option<bool> {
        if self.robustness > 0.0 {
            Some(true)
        } else if self.robustness < 0.0 {
            Some(false)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    Forall,
    Exists,
}

/// Prenex HyperSTL formula. Variable `k` is the `k`-th quantifier of the prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperFormula {
    prefix: Vec<Quantifier>,
    body: Formula,
}

impl HyperFormula {
    pub fn new(prefix: Vec<Quantifier>, body: Formula) -> Result<Self, LogicError> {
        if let Some(v) = body.max_var() {
            if v >= prefix.len() {
                return Err(LogicError::UnboundVariable {
                    var: v,
                    bound: prefix.len(),
                });
            }
        }
        Ok(HyperFormula { prefix, body })
    }

    pub fn prefix(&self) -> &[Quantifier] {
        &self.prefix
    }

    pub fn body(&self) -> &Formula {
        &self.body
    }

    /// Evaluates the closed formula over `system` at time `t`. Quantifiers range over the
    /// system; `∃` is a maximum and `∀` a minimum, so an empty system makes `∃` false
    /// with robustness `-∞` and `∀` true with robustness `∞`.
    pub fn evaluate(&self, system: &[Trace], t: usize) -> Result<EvalResult, LogicError> {
        self.evaluate_with(system, &[], t)
    }

    /// As [`HyperFormula::evaluate`], with the first `bound.len()` variables pre-assigned.
    pub fn evaluate_with(
        &self,
        system: &[Trace],
        bound: &[&Trace],
        t: usize,
    ) -> Result<EvalResult, LogicError> {
        let mut all: Vec<&Trace> = bound.to_vec();
        all.extend(system.iter());
        if all.is_empty() {
            let boolean = self.prefix.first() != Some(&Quantifier::Exists);
            return Ok(EvalResult {
                boolean,
                robustness: if boolean {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
            });
        }
        let horizon = common_horizon(&all)?;
        if t >= horizon {
            return Err(LogicError::TimeOutOfRange { t, horizon });
        }
        let mut assignment = bound.to_vec();
        Ok(self.quantify(system, &mut assignment, horizon, t))
    }

    fn quantify<'a>(
        &self,
        system: &'a [Trace],
        assignment: &mut Vec<&'a Trace>,
        horizon: usize,
        t: usize,
    ) -> EvalResult {
        let depth = assignment.len();
        if depth == self.prefix.len() {
            let (b, r) = self.body.signals(assignment, horizon);
            return EvalResult {
                boolean: b[t],
                robustness: r[t],
            };
        }
        let exists = self.prefix[depth] == Quantifier::Exists;
        let mut boolean = !exists;
        let mut robustness = if exists {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        };
        for w in system {
            assignment.push(w);
            let r = self.quantify(system, assignment, horizon, t);
            assignment.pop();
            if exists {
                boolean |= r.boolean;
                robustness = robustness.max(r.robustness);
            } else {
                boolean &= r.boolean;
                robustness = robustness.min(r.robustness);
            }
        }
        EvalResult {
            boolean,
            robustness,
        }
    }

    pub fn eval_bool(&self, system: &[Trace], t: usize) -> Result<bool, LogicError> {
        Ok(self.evaluate(system, t)?.boolean)
    }

    pub fn eval_quant(&self, system: &[Trace], t: usize) -> Result<f64, LogicError> {
        Ok(self.evaluate(system, t)?.robustness)
    }
}

impl fmt::Display for HyperFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, q) in self.prefix.iter().enumerate() {
            let sym = match q {
                Quantifier::Forall => "forall",
                Quantifier::Exists => "exists",
            };
            write!(f, "{sym} {}. ", var_name(k))?;
        }
        write!(f, "{}", self.body)
    }
}
