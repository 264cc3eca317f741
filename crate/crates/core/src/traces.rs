//! Finite discrete-time traces and the distance functions used by contracts.
//!
//! A [`Trace`] is a non-empty sequence of [`Value`]s indexed by time step. All values of
//! one trace share a [`DomainKind`]. Mixed-IO traces interleave inputs, outputs and
//! quiescence freely; their input/output projections replace the other side by a mask.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace must contain at least one value")]
    Empty,
    #[error("value at step {index} is a {found} but the trace is {expected}")]
    MixedKinds {
        index: usize,
        expected: DomainKind,
        found: DomainKind,
    },
    #[error("mask symbol at step {index}: masks only appear in projections")]
    MaskInRawTrace { index: usize },
    #[error("non-finite component at step {index}")]
    NonFinite { index: usize },
    #[error("vector at step {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("operation needs a mixed-IO or pair trace, got {0}")]
    NotProjectable(DomainKind),
    #[error("cannot pad a {0} trace with quiescence")]
    NotPaddable(DomainKind),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One trace symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    RealVec(Vec<f64>),
    Pair { input: f64, output: f64 },
    In(f64),
    Out(f64),
    Quiescence,
    MaskIn,
    MaskOut,
}

/// The value domain a trace ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainKind {
    RealVec,
    PairIo,
    MixedIo,
    InputProjection,
    OutputProjection,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainKind::RealVec => "real-vector",
            DomainKind::PairIo => "pair",
            DomainKind::MixedIo => "mixed-IO",
            DomainKind::InputProjection => "input-projection",
            DomainKind::OutputProjection => "output-projection",
        })
    }
}

impl DomainKind {
    fn admits(self, v: &Value) -> bool {
        matches!(
            (self, v),
            (DomainKind::RealVec, Value::RealVec(_))
                | (DomainKind::PairIo, Value::Pair { .. })
                | (
                    DomainKind::MixedIo,
                    Value::In(_) | Value::Out(_) | Value::Quiescence
                )
                | (DomainKind::InputProjection, Value::In(_) | Value::MaskIn)
                | (
                    DomainKind::OutputProjection,
                    Value::Out(_) | Value::Quiescence | Value::MaskOut
                )
        )
    }
}

impl Value {
    fn natural_kind(&self) -> DomainKind {
        match self {
            Value::RealVec(_) => DomainKind::RealVec,
            Value::Pair { .. } => DomainKind::PairIo,
            Value::In(_) | Value::Out(_) | Value::Quiescence => DomainKind::MixedIo,
            Value::MaskIn => DomainKind::InputProjection,
            Value::MaskOut => DomainKind::OutputProjection,
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Value::RealVec(xs) => xs.iter().all(|x| x.is_finite()),
            Value::Pair { input, output } => input.is_finite() && output.is_finite(),
            Value::In(x) | Value::Out(x) => x.is_finite(),
            _ => true,
        }
    }

    /// Input projection of a single symbol (`in|v`).
    pub fn input_part(&self) -> Value {
        match self {
            Value::Pair { input, .. } => Value::In(*input),
            Value::In(x) => Value::In(*x),
            Value::RealVec(xs) => Value::RealVec(xs.clone()),
            Value::Out(_) | Value::Quiescence | Value::MaskIn | Value::MaskOut => Value::MaskIn,
        }
    }

    /// Output projection of a single symbol (`out|v`).
    pub fn output_part(&self) -> Value {
        match self {
            Value::Pair { output, .. } => Value::Out(*output),
            Value::Out(x) => Value::Out(*x),
            Value::Quiescence => Value::Quiescence,
            Value::RealVec(xs) => Value::RealVec(xs.clone()),
            Value::In(_) | Value::MaskIn | Value::MaskOut => Value::MaskOut,
        }
    }

    /// The scalar carried by a numeric symbol, if any.
    pub fn scalar(&self) -> Option<f64> {
        match self {
            Value::In(x) | Value::Out(x) => Some(*x),
            Value::RealVec(xs) if xs.len() == 1 => Some(xs[0]),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::RealVec(xs) => {
                f.write_str("[")?;
                for (k, x) in xs.iter().enumerate() {
                    if k > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str("]")
            }
            Value::Pair { input, output } => write!(f, "({input};{output})"),
            Value::In(x) => write!(f, "{x}i"),
            Value::Out(x) => write!(f, "{x}o"),
            Value::Quiescence => f.write_str("δ"),
            Value::MaskIn => f.write_str("-i"),
            Value::MaskOut => f.write_str("-o"),
        }
    }
}

/// A finite generalized timed trace over the discrete time domain.
///
/// The horizon is the number of values. Raw traces never contain masks; those are only
/// produced by [`Trace::project_inputs`] and [`Trace::project_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    values: Vec<Value>,
    kind: DomainKind,
}

impl Trace {
    pub fn new(values: Vec<Value>) -> Result<Self, TraceError> {
        let first = values.first().ok_or(TraceError::Empty)?;
        let kind = first.natural_kind();
        for (index, v) in values.iter().enumerate() {
            if matches!(v, Value::MaskIn | Value::MaskOut) {
                return Err(TraceError::MaskInRawTrace { index });
            }
            if !kind.admits(v) {
                return Err(TraceError::MixedKinds {
                    index,
                    expected: kind,
                    found: v.natural_kind(),
                });
            }
            if !v.is_finite() {
                return Err(TraceError::NonFinite { index });
            }
        }
        if let Value::RealVec(head) = first {
            for (index, v) in values.iter().enumerate() {
                if let Value::RealVec(xs) = v {
                    if xs.len() != head.len() {
                        return Err(TraceError::DimensionMismatch {
                            index,
                            expected: head.len(),
                            found: xs.len(),
                        });
                    }
                }
            }
        }
        Ok(Trace { values, kind })
    }

    /// Scalar real-valued trace (each value a one-component vector).
    pub fn scalars(xs: &[f64]) -> Result<Self, TraceError> {
        Trace::new(xs.iter().map(|&x| Value::RealVec(vec![x])).collect())
    }

    /// Trace of `(input; output)` pairs.
    pub fn pairs(ps: &[(f64, f64)]) -> Result<Self, TraceError> {
        Trace::new(
            ps.iter()
                .map(|&(input, output)| Value::Pair { input, output })
                .collect(),
        )
    }

    /// Trace of input symbols only.
    pub fn inputs(xs: &[f64]) -> Result<Self, TraceError> {
        Trace::new(xs.iter().map(|&x| Value::In(x)).collect())
    }

    /// Parses the compact mixed-IO notation `1i 2i 7o δ` (`d` is accepted for `δ`).
    pub fn parse_mixed(text: &str) -> Result<Self, TraceError> {
        let mut values = Vec::new();
        for (k, tok) in text.split_whitespace().enumerate() {
            let v = match tok {
                "δ" | "d" => Value::Quiescence,
                _ if tok.ends_with('i') || tok.ends_with('o') => {
                    let (num, tag) = tok.split_at(tok.len() - 1);
                    let x: f64 = num.parse().map_err(|_| TraceError::Parse {
                        line: 1,
                        message: format!("token {k}: bad number {num:?}"),
                    })?;
                    if tag == "i" {
                        Value::In(x)
                    } else {
                        Value::Out(x)
                    }
                }
                _ => {
                    return Err(TraceError::Parse {
                        line: 1,
                        message: format!("token {k}: unknown symbol {tok:?}"),
                    })
                }
            };
            values.push(v);
        }
        Trace::new(values)
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn at(&self, t: usize) -> &Value {
        &self.values[t]
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    fn projectable(&self) -> Result<(), TraceError> {
        match self.kind {
            DomainKind::MixedIo | DomainKind::PairIo => Ok(()),
            other => Err(TraceError::NotProjectable(other)),
        }
    }

    /// `in|w`: outputs and quiescence become `MaskIn`.
    pub fn project_inputs(&self) -> Result<Trace, TraceError> {
        self.projectable()?;
        Ok(Trace {
            values: self.values.iter().map(Value::input_part).collect(),
            kind: DomainKind::InputProjection,
        })
    }

    /// `out|w`: inputs become `MaskOut`; quiescence is kept.
    pub fn project_outputs(&self) -> Result<Trace, TraceError> {
        self.projectable()?;
        Ok(Trace {
            values: self.values.iter().map(Value::output_part).collect(),
            kind: DomainKind::OutputProjection,
        })
    }

    /// Truncates, or extends a mixed-IO trace with its implicit quiescence suffix.
    pub fn with_horizon(&self, horizon: usize) -> Result<Trace, TraceError> {
        if horizon == 0 {
            return Err(TraceError::Empty);
        }
        let mut values: Vec<Value> = self.values.iter().take(horizon).cloned().collect();
        if values.len() < horizon {
            if self.kind != DomainKind::MixedIo {
                return Err(TraceError::NotPaddable(self.kind));
            }
            values.resize(horizon, Value::Quiescence);
        }
        Ok(Trace {
            values,
            kind: self.kind,
        })
    }

    /// Reads the `t,kind,value` CSV format.
    pub fn read_csv<R: Read>(reader: R) -> Result<Trace, TraceError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| csv_err(1, e))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "kind", "value"] {
            return Err(TraceError::Parse {
                line: 1,
                message: format!("expected header t,kind,value, got {headers:?}"),
            });
        }
        let mut values = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| csv_err(line, e))?;
            let bad = |message: String| TraceError::Parse { line, message };
            if rec.len() < 2 {
                return Err(bad("expected 3 columns".into()));
            }
            let t: usize = rec[0]
                .parse()
                .map_err(|_| bad(format!("bad time index {:?}", &rec[0])))?;
            if t != values.len() {
                return Err(bad(format!("time index {t} out of sequence")));
            }
            let field = rec.get(2).unwrap_or("");
            let num = |s: &str| -> Result<f64, TraceError> {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad number {s:?}")))
            };
            let v = match &rec[1] {
                "in" => Value::In(num(field)?),
                "out" => Value::Out(num(field)?),
                "quiescent" => Value::Quiescence,
                "pair" => {
                    let (i, o) = field
                        .split_once(';')
                        .ok_or_else(|| bad(format!("pair value {field:?} lacks ';'")))?;
                    Value::Pair {
                        input: num(i)?,
                        output: num(o)?,
                    }
                }
                other => return Err(bad(format!("unknown kind {other:?}"))),
            };
            values.push(v);
        }
        Trace::new(values)
    }

    pub fn load_csv(path: &Path) -> Result<Trace, TraceError> {
        Trace::read_csv(std::fs::File::open(path)?)
    }

    /// Writes the `t,kind,value` CSV format. Only raw mixed-IO and pair traces are writable.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<(), TraceError> {
        self.projectable()?;
        writeln!(out, "t,kind,value")?;
        for (t, v) in self.values.iter().enumerate() {
            match v {
                Value::In(x) => writeln!(out, "{t},in,{x}")?,
                Value::Out(x) => writeln!(out, "{t},out,{x}")?,
                Value::Quiescence => writeln!(out, "{t},quiescent,")?,
                Value::Pair { input, output } => writeln!(out, "{t},pair,{input};{output}")?,
                _ => unreachable!("raw traces hold no masks or vectors here"),
            }
        }
        Ok(())
    }
}

fn csv_err(line: usize, e: csv::Error) -> TraceError {
    TraceError::Parse {
        line,
        message: e.to_string(),
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.values.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Built-in distance functions. Every kind satisfies `d(x,x) = 0` and symmetry on its
/// declared domain and returns `∞` for incomparable symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distance {
    /// `|i1 - i2|` on inputs, `0` on two input masks, `∞` otherwise.
    MixedIn,
    /// `|o1 - o2|` on proper outputs, `0` on matching masks or quiescence, `∞` otherwise.
    MixedOut,
    /// `|a - b|` on any two scalar symbols; identical non-numeric symbols are at distance 0.
    AbsScalar,
    /// Euclidean distance divided by `sqrt(dim)`.
    EuclidNormalized { dim: usize },
    /// Explicit symmetric table of `[a, b, d]` rows over scalar symbols.
    CustomTable { entries: Vec<[f64; 3]> },
}

impl Distance {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            Distance::EuclidNormalized { dim } if *dim == 0 => {
                Err("euclid-normalized needs dim >= 1".into())
            }
            Distance::CustomTable { entries } => {
                for (k, [a, b, d]) in entries.iter().enumerate() {
                    if !a.is_finite() || !b.is_finite() {
                        return Err(format!("table row {k}: keys must be finite"));
                    }
                    if d.is_nan() || *d < 0.0 {
                        return Err(format!("table row {k}: distance must be non-negative"));
                    }
                    if a == b && *d != 0.0 {
                        return Err(format!("table row {k}: d(x,x) must be 0"));
                    }
                    for [a2, b2, d2] in &entries[..k] {
                        let same = (a2 == a && b2 == b) || (a2 == b && b2 == a);
                        if same && d2 != d {
                            return Err(format!("table row {k}: conflicting entry for ({a},{b})"));
                        }
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn between(&self, a: &Value, b: &Value) -> f64 {
        use Value::*;
        match self {
            Distance::MixedIn => match (a, b) {
                (In(x), In(y)) => (x - y).abs(),
                (MaskIn, MaskIn) => 0.0,
                _ => f64::INFINITY,
            },
            Distance::MixedOut => match (a, b) {
                (Out(x), Out(y)) => (x - y).abs(),
                (MaskOut, MaskOut) | (Quiescence, Quiescence) => 0.0,
                _ => f64::INFINITY,
            },
            Distance::AbsScalar => match (a.scalar(), b.scalar()) {
                (Some(x), Some(y)) => (x - y).abs(),
                _ if a == b => 0.0,
                _ => f64::INFINITY,
            },
            Distance::EuclidNormalized { dim } => match (a, b) {
                (RealVec(xs), RealVec(ys)) if xs.len() == *dim && ys.len() == *dim => {
                    euclid_normalized(xs, ys)
                }
                _ if a == b => 0.0,
                _ => f64::INFINITY,
            },
            Distance::CustomTable { entries } => {
                if a == b {
                    return 0.0;
                }
                match (a.scalar(), b.scalar()) {
                    (Some(x), Some(y)) => entries
                        .iter()
                        .find(|[p, q, _]| (*p == x && *q == y) || (*p == y && *q == x))
                        .map_or(f64::INFINITY, |row| row[2]),
                    _ => f64::INFINITY,
                }
            }
        }
    }

    /// Distance between two input vectors (fairness inputs).
    pub fn between_vectors(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Distance::EuclidNormalized { .. } if a.len() == b.len() && !a.is_empty() => {
                euclid_normalized(a, b)
            }
            Distance::MixedIn if a.len() == 1 && b.len() == 1 => {
                self.between(&Value::In(a[0]), &Value::In(b[0]))
            }
            Distance::MixedOut if a.len() == 1 && b.len() == 1 => {
                self.between(&Value::Out(a[0]), &Value::Out(b[0]))
            }
            _ => self.between(&Value::RealVec(a.to_vec()), &Value::RealVec(b.to_vec())),
        }
    }

    /// Distance between two scalar outputs.
    pub fn between_scalars(&self, a: f64, b: f64) -> f64 {
        self.between_vectors(&[a], &[b])
    }
}

fn euclid_normalized(xs: &[f64], ys: &[f64]) -> f64 {
    let sq: f64 = xs.iter().zip(ys).map(|(x, y)| (x - y) * (x - y)).sum();
    (sq / xs.len() as f64).sqrt()
}

pub const DEFAULT_EPSILON: f64 = 0.001;

/// Parameters of the input-equality measure `eq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqConfig {
    pub base: Distance,
    pub epsilon: f64,
}

impl EqConfig {
    pub fn new(base: Distance, epsilon: f64) -> Result<Self, String> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(format!("epsilon must be a positive real, got {epsilon}"));
        }
        Ok(EqConfig { base, epsilon })
    }

    /// `0` iff `a == b`; `d(a,b) + ε` for two distinct proper inputs; `∞` otherwise.
    pub fn measure(&self, a: &Value, b: &Value) -> f64 {
        if a == b {
            return 0.0;
        }
        let proper = |v: &Value| matches!(v, Value::In(_) | Value::RealVec(_));
        if proper(a) && proper(b) {
            self.base.between(a, b) + self.epsilon
        } else {
            f64::INFINITY
        }
    }
}

impl Default for EqConfig {
    fn default() -> Self {
        EqConfig {
            base: Distance::MixedIn,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const INF: f64 = f64::INFINITY;

    fn mixed(s: &str) -> Trace {
        Trace::parse_mixed(s).unwrap()
    }

    #[test]
    fn project_inputs_masks_outputs() {
        let w = mixed("1i 7o δ");
        let p = w.project_inputs().unwrap();
        assert_eq!(p.values(), &[Value::In(1.0), Value::MaskIn, Value::MaskIn]);
        assert_eq!(p.kind(), DomainKind::InputProjection);

        let all_in = mixed("1i 2i 3i");
        assert_eq!(all_in.project_inputs().unwrap().values(), all_in.values());

        let w1 = mixed("1i 2i 3i 7o 0i δ");
        assert_eq!(
            w1.project_inputs().unwrap().to_string(),
            "1i 2i 3i -i 0i -i"
        );
    }

    #[test]
    fn project_outputs_masks_inputs() {
        let w = mixed("1i 7o δ");
        assert_eq!(
            w.project_outputs().unwrap().values(),
            &[Value::MaskOut, Value::Out(7.0), Value::Quiescence]
        );
        let all_out = mixed("1o 2o δ");
        assert_eq!(
            all_out.project_outputs().unwrap().values(),
            all_out.values()
        );

        let w = mixed("0i 1i 2i 6o 0i δ");
        assert_eq!(w.project_outputs().unwrap().to_string(), "-o -o -o 6o -o δ");
    }

    #[test]
    fn projection_rejects_real_vectors() {
        let w = Trace::scalars(&[1.0, 2.0]).unwrap();
        assert!(matches!(
            w.project_inputs(),
            Err(TraceError::NotProjectable(DomainKind::RealVec))
        ));
    }

    #[test]
    fn pair_projection() {
        let w = Trace::pairs(&[(1.0, 0.0), (2.0, 3.0)]).unwrap();
        assert_eq!(w.project_inputs().unwrap().to_string(), "1i 2i");
        assert_eq!(w.project_outputs().unwrap().to_string(), "0o 3o");
    }

    #[test]
    fn raw_trace_invariants() {
        assert!(matches!(Trace::new(vec![]), Err(TraceError::Empty)));
        assert!(matches!(
            Trace::new(vec![Value::In(1.0), Value::MaskIn]),
            Err(TraceError::MaskInRawTrace { index: 1 })
        ));
        assert!(matches!(
            Trace::new(vec![Value::In(1.0), Value::RealVec(vec![1.0])]),
            Err(TraceError::MixedKinds { index: 1, .. })
        ));
        assert!(matches!(
            Trace::new(vec![
                Value::RealVec(vec![1.0]),
                Value::RealVec(vec![1.0, 2.0])
            ]),
            Err(TraceError::DimensionMismatch { index: 1, .. })
        ));
        assert!(matches!(
            Trace::scalars(&[f64::NAN]),
            Err(TraceError::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn padding_appends_quiescence() {
        let w = mixed("1i 7o").with_horizon(4).unwrap();
        assert_eq!(w.to_string(), "1i 7o δ δ");
        assert_eq!(mixed("1i 2i 3i").with_horizon(2).unwrap().horizon(), 2);
        assert!(Trace::pairs(&[(1.0, 1.0)])
            .unwrap()
            .with_horizon(3)
            .is_err());
    }

    #[test]
    fn mixed_in_distance_cases() {
        let d = Distance::MixedIn;
        assert_eq!(d.between(&Value::In(3.0), &Value::In(3.0)), 0.0);
        assert_eq!(d.between(&Value::MaskIn, &Value::In(5.0)), INF);
        assert!((d.between(&Value::In(4.0), &Value::In(5.2)) - 1.2).abs() < 1e-12);
        assert_eq!(d.between(&Value::MaskIn, &Value::MaskIn), 0.0);
    }

    #[test]
    fn mixed_out_distance_cases() {
        let d = Distance::MixedOut;
        assert_eq!(d.between(&Value::Quiescence, &Value::Quiescence), 0.0);
        assert_eq!(d.between(&Value::Out(6.0), &Value::Out(7.0)), 1.0);
        assert_eq!(d.between(&Value::Quiescence, &Value::Out(6.0)), INF);
        assert_eq!(d.between(&Value::MaskOut, &Value::MaskOut), 0.0);
        assert_eq!(d.between(&Value::MaskOut, &Value::Quiescence), INF);
    }

    #[test]
    fn eq_measure_cases() {
        let cfg = EqConfig::new(Distance::MixedIn, 0.001).unwrap();
        assert_eq!(cfg.measure(&Value::In(2.0), &Value::In(2.0)), 0.0);
        assert!((cfg.measure(&Value::In(1.0), &Value::In(2.0)) - 1.001).abs() < 1e-12);
        assert_eq!(cfg.measure(&Value::MaskIn, &Value::In(1.0)), INF);
        assert_eq!(cfg.measure(&Value::MaskIn, &Value::MaskIn), 0.0);
        assert!(EqConfig::new(Distance::MixedIn, 0.0).is_err());
        assert!(EqConfig::new(Distance::MixedIn, -1.0).is_err());
    }

    #[test]
    fn euclid_normalized_matches_hand_value() {
        let d = Distance::EuclidNormalized { dim: 5 };
        let john = [0.5, 0.5, 0.5, 0.5, 0.2];
        let synthia = [0.5, 0.5, 0.5, 0.5, 0.19];
        let expected = (0.01f64 * 0.01 / 5.0).sqrt();
        assert!((d.between_vectors(&john, &synthia) - expected).abs() < 1e-15);
        assert_eq!(d.between_vectors(&john, &[0.5]), INF);
    }

    #[test]
    fn custom_table_lookup() {
        let d = Distance::CustomTable {
            entries: vec![[1.0, 2.0, 0.5]],
        };
        assert!(d.validate().is_ok());
        assert_eq!(d.between(&Value::In(2.0), &Value::In(1.0)), 0.5);
        assert_eq!(d.between(&Value::In(2.0), &Value::In(3.0)), INF);
        assert_eq!(d.between(&Value::In(3.0), &Value::In(3.0)), 0.0);
        let bad = Distance::CustomTable {
            entries: vec![[1.0, 2.0, 0.5], [2.0, 1.0, 0.7]],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn csv_round_trip_with_pairs() {
        let text = "t,kind,value\n0,pair,1;0\n1,pair,2.5;3.25\n";
        let w = Trace::read_csv(text.as_bytes()).unwrap();
        assert_eq!(
            w.values()[1],
            Value::Pair {
                input: 2.5,
                output: 3.25
            }
        );
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
    }

    #[test]
    fn csv_mixed_and_errors() {
        let text = "t,kind,value\n0,in,1\n1,out,7\n2,quiescent,\n";
        let w = Trace::read_csv(text.as_bytes()).unwrap();
        assert_eq!(w.to_string(), "1i 7o δ");

        let bad_pair = "t,kind,value\n0,pair,1\n";
        assert!(matches!(
            Trace::read_csv(bad_pair.as_bytes()),
            Err(TraceError::Parse { line: 2, .. })
        ));
        let gap = "t,kind,value\n0,in,1\n2,in,1\n";
        assert!(matches!(
            Trace::read_csv(gap.as_bytes()),
            Err(TraceError::Parse { line: 3, .. })
        ));
        let kind = "t,kind,value\n0,foo,1\n";
        assert!(Trace::read_csv(kind.as_bytes()).is_err());
    }

    fn arb_symbol() -> impl Strategy<Value = Value> {
        prop_oneof![
            (-5i32..5).prop_map(|x| Value::In(x as f64 * 0.5)),
            (-5i32..5).prop_map(|x| Value::Out(x as f64 * 0.5)),
            Just(Value::Quiescence),
            Just(Value::MaskIn),
            Just(Value::MaskOut),
        ]
    }

    fn distances() -> Vec<Distance> {
        vec![
            Distance::MixedIn,
            Distance::MixedOut,
            Distance::AbsScalar,
            Distance::EuclidNormalized { dim: 1 },
            Distance::CustomTable {
                entries: vec![[0.5, 1.0, 3.0], [-1.0, 2.0, 0.25]],
            },
        ]
    }

    proptest! {
        #[test]
        fn distance_axioms(a in arb_symbol(), b in arb_symbol()) {
            for d in distances() {
                prop_assert_eq!(d.between(&a, &a) == 0.0 || d.between(&a, &a).is_infinite(), true);
                let ab = d.between(&a, &b);
                prop_assert!(ab >= 0.0);
                prop_assert_eq!(ab.to_bits(), d.between(&b, &a).to_bits());
            }
            // reflexivity on each distance's declared domain
            let in_domain = |v: &Value| matches!(v, Value::In(_) | Value::MaskIn);
            let out_domain = |v: &Value| matches!(v, Value::Out(_) | Value::MaskOut | Value::Quiescence);
            if in_domain(&a) { prop_assert_eq!(Distance::MixedIn.between(&a, &a), 0.0); }
            if out_domain(&a) { prop_assert_eq!(Distance::MixedOut.between(&a, &a), 0.0); }
            prop_assert_eq!(Distance::AbsScalar.between(&a, &a), 0.0);
        }

        #[test]
        fn eq_zero_iff_identical(a in arb_symbol(), b in arb_symbol(), eps in 1e-6f64..1.0) {
            let cfg = EqConfig::new(Distance::MixedIn, eps).unwrap();
            let m = cfg.measure(&a, &b);
            prop_assert!(m >= 0.0);
            prop_assert_eq!(m == 0.0, a == b);
        }

        #[test]
        fn mixed_distances_infinite_only_across_kinds(a in arb_symbol(), b in arb_symbol()) {
            let din = Distance::MixedIn.between(&a, &b);
            let both_in = matches!((&a, &b), (Value::In(_), Value::In(_)) | (Value::MaskIn, Value::MaskIn));
            prop_assert_eq!(din.is_finite(), both_in);
        }

        #[test]
        fn projections_preserve_horizon_and_are_idempotent(
            syms in proptest::collection::vec(prop_oneof![
                (-3i32..3).prop_map(|x| Value::In(x as f64)),
                (-3i32..3).prop_map(|x| Value::Out(x as f64)),
                Just(Value::Quiescence),
            ], 1..12)
        ) {
            let w = Trace::new(syms).unwrap();
            let pi = w.project_inputs().unwrap();
            let po = w.project_outputs().unwrap();
            prop_assert_eq!(pi.horizon(), w.horizon());
            prop_assert_eq!(po.horizon(), w.horizon());
            let pi2: Vec<Value> = pi.values().iter().map(Value::input_part).collect();
            let po2: Vec<Value> = po.values().iter().map(Value::output_part).collect();
            prop_assert_eq!(&pi2[..], pi.values());
            prop_assert_eq!(&po2[..], po.values());
        }
    }
}
