//! Individual fairness: fairness contracts, the fairness score, the Metropolis fairness
//! monitor, the fairness-aware wrapper, a Lipschitz checker and reference scoring systems.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ext;
use crate::falsify::{metropolis_accept, rng_from_seed, FalsifierConfig, SearchRng};
use crate::piecewise::PiecewiseLinear;
use crate::traces::Distance;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("expected {expected} input components, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("component {index} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error)]
pub enum FairnessError {
    #[error("system failed on input {input:?}: {source}")]
    System {
        input: Vec<f64>,
        source: SystemError,
    },
    #[error("set of actual inputs is empty")]
    NoActualInputs,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("table system: {0}")]
    Table(String),
}

/// A deterministic system scoring real input vectors.
pub trait ScoringSystem: Send + Sync {
    fn dim(&self) -> usize;
    /// Per-component `[lo, hi]` of the declared input domain.
    fn bounds(&self) -> Vec<(f64, f64)>;
    fn evaluate(&self, input: &[f64]) -> Result<f64, SystemError>;

    fn check(&self, input: &[f64]) -> Result<(), SystemError> {
        if input.len() != self.dim() {
            return Err(SystemError::Dimension {
                expected: self.dim(),
                found: input.len(),
            });
        }
        for (index, (&value, (lo, hi))) in input.iter().zip(self.bounds()).enumerate() {
            if !(value >= lo && value <= hi) {
                return Err(SystemError::OutOfRange {
                    index,
                    value,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }
}

fn run(p: &dyn ScoringSystem, input: &[f64]) -> Result<f64, FairnessError> {
    p.evaluate(input).map_err(|source| FairnessError::System {
        input: input.to_vec(),
        source,
    })
}

/// `⟨dIn, dOut, f⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct FairnessContract {
    pub d_in: Distance,
    pub d_out: Distance,
    pub f: PiecewiseLinear,
}

impl FairnessContract {
    /// The reference contract: normalised Euclidean inputs, absolute output difference and
    /// the three-slope bound [`reference_f`].
    pub fn reference() -> Self {
        FairnessContract {
            d_in: Distance::EuclidNormalized { dim: 5 },
            d_out: Distance::AbsScalar,
            f: reference_f(),
        }
    }

    pub fn bound(&self, actual: &[f64], synthetic: &[f64]) -> f64 {
        self.f.eval(self.d_in.between_vectors(actual, synthetic))
    }

    /// `F = f(dIn(i_r, i_s)) − dOut(o_r, o_s)` for known outputs.
    pub fn score_with_outputs(&self, actual: &[f64], o_r: f64, synthetic: &[f64], o_s: f64) -> f64 {
        ext::sub(
            self.bound(actual, synthetic),
            self.d_out.between_scalars(o_r, o_s),
        )
    }
}

/// `0.001 + 8d` on `[0, 0.01]`, `0.001 + 4d` on `(0.01, 0.1]`, `0.001 + 2d` beyond.
pub fn reference_f() -> PiecewiseLinear {
    PiecewiseLinear::new(vec![
        [0.0, 0.01, 8.0, 0.001],
        [0.01, 0.1, 4.0, 0.001],
        [0.1, 1.0, 2.0, 0.001],
    ])
    .expect("static segments are valid")
}

pub fn fairness_score(
    p: &dyn ScoringSystem,
    c: &FairnessContract,
    actual: &[f64],
    synthetic: &[f64],
) -> Result<f64, FairnessError> {
    let o_r = run(p, actual)?;
    let o_s = run(p, synthetic)?;
    Ok(c.score_with_outputs(actual, o_r, synthetic, o_s))
}

/// `F(I, i_s) = min over I`; returns the score and the first minimising index.
pub fn fairness_score_set(
    p: &dyn ScoringSystem,
    c: &FairnessContract,
    actual: &[Vec<f64>],
    synthetic: &[f64],
) -> Result<(f64, usize), FairnessError> {
    let o_s = run(p, synthetic)?;
    let outs = actual
        .iter()
        .map(|i| run(p, i))
        .collect::<Result<Vec<_>, _>>()?;
    rob_min(c, actual, &outs, synthetic, o_s).ok_or(FairnessError::NoActualInputs)
}

fn rob_min(
    c: &FairnessContract,
    actual: &[Vec<f64>],
    outs: &[f64],
    synthetic: &[f64],
    o_s: f64,
) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (k, (i, &o)) in actual.iter().zip(outs).enumerate() {
        let f = c.score_with_outputs(i, o, synthetic, o_s);
        if best.is_none_or(|(b, _)| f < b) {
            best = Some((f, k));
        }
    }
    best
}

/// Proposes the next synthetic input; receives the current input's system output.
pub trait InputProposal {
    fn propose(&mut self, current: &[f64], output: f64, rng: &mut SearchRng) -> Vec<f64>;
}

/// Moves one uniformly chosen component by a uniform step in `[-bound, bound]` and clamps
/// it into its range. Ignores the output.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentProposal {
    pub bound: f64,
    pub ranges: Vec<(f64, f64)>,
}

impl ComponentProposal {
    pub fn for_system(p: &dyn ScoringSystem, bound: f64) -> Self {
        ComponentProposal {
            bound,
            ranges: p.bounds(),
        }
    }
}

impl InputProposal for ComponentProposal {
    fn propose(&mut self, current: &[f64], _output: f64, rng: &mut SearchRng) -> Vec<f64> {
        let mut next = current.to_vec();
        if next.is_empty() || self.bound <= 0.0 {
            return next;
        }
        let k = rng.gen_range(0..next.len());
        let step = rng.gen_range(-self.bound..=self.bound);
        let (lo, hi) = self.ranges[k];
        next[k] = (next[k] + step).clamp(lo, hi);
        next
    }
}

impl<F> InputProposal for F
where
    F: FnMut(&[f64], f64, &mut SearchRng) -> Vec<f64>,
{
    fn propose(&mut self, current: &[f64], output: f64, rng: &mut SearchRng) -> Vec<f64> {
        self(current, output, rng)
    }
}

/// `(F, i_r, i_s)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreTriple {
    pub score: f64,
    pub actual_index: usize,
    pub actual: Vec<f64>,
    pub synthetic: Vec<f64>,
}

/// One probed synthetic input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub iteration: usize,
    pub score: f64,
    pub actual_index: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorRun {
    pub best: ScoreTriple,
    pub iterations: usize,
    pub log: Vec<Probe>,
}

/// Metropolis search for the minimal fairness score over synthetic inputs.
///
/// Starts from the first actual input, scores every proposal against all actual inputs
/// (ties go to the first), keeps the global minimum over every proposal, accepted or not,
/// and runs exactly `cfg.max_iterations` proposals.
pub fn fairness_monitor(
    p: &dyn ScoringSystem,
    c: &FairnessContract,
    actual: &[Vec<f64>],
    cfg: &FalsifierConfig,
    proposals: &mut dyn InputProposal,
) -> Result<MonitorRun, FairnessError> {
    cfg.validate().map_err(FairnessError::Config)?;
    let first = actual.first().ok_or(FairnessError::NoActualInputs)?;
    let outs = actual
        .iter()
        .map(|i| run(p, i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut beta = cfg.beta;

    let mut current = first.clone();
    let mut current_out = outs[0];
    let (mut score, k0) = rob_min(c, actual, &outs, &current, current_out).expect("non-empty");
    let mut best = ScoreTriple {
        score,
        actual_index: k0,
        actual: actual[k0].clone(),
        synthetic: current.clone(),
    };
    let mut log = vec![Probe {
        iteration: 0,
        score,
        actual_index: k0,
        accepted: true,
    }];
    let mut stale = 0;
    for iteration in 1..=cfg.max_iterations {
        let candidate = proposals.propose(&current, current_out, &mut rng);
        let cand_out = run(p, &candidate)?;
        let (cand_score, k) = rob_min(c, actual, &outs, &candidate, cand_out).expect("non-empty");
        if cand_score < best.score {
            best = ScoreTriple {
                score: cand_score,
                actual_index: k,
                actual: actual[k].clone(),
                synthetic: candidate.clone(),
            };
            stale = 0;
        } else {
            stale += 1;
        }
        let accepted = metropolis_accept(beta, score, cand_score, &mut rng);
        log.push(Probe {
            iteration,
            score: cand_score,
            actual_index: k,
            accepted,
        });
        if accepted {
            current = candidate;
            current_out = cand_out;
            score = cand_score;
        }
        if let Some(a) = cfg.adaptation {
            if stale >= a.window {
                beta *= a.factor;
                stale = 0;
            }
        }
    }
    Ok(MonitorRun {
        best,
        iterations: cfg.max_iterations,
        log,
    })
}

/// Output of the fairness-aware wrapper for one actual input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessVerdict {
    pub system_output: f64,
    pub score: f64,
    /// `F / f(dIn)`; `-∞` marks a violation with a zero bound ("maximally unfair").
    pub normalized: f64,
    pub counterpart: Vec<f64>,
    pub counterpart_output: f64,
    /// `f(dIn(i_r, i_s))`, the output distance limit for the witnessed pair.
    pub bound: f64,
    pub d_out: f64,
}

impl FairnessVerdict {
    pub fn flagged(&self) -> bool {
        self.normalized < 0.0
    }
}

/// `F / bound`, with `0 / 0 = 0`, `negative / 0 = -∞` and `∞ / ∞ = 1`.
pub fn normalize(score: f64, bound: f64) -> f64 {
    if bound == 0.0 {
        if score < 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    } else if score.is_infinite() && bound.is_infinite() {
        score.signum()
    } else {
        score / bound
    }
}

pub fn fairness_aware(
    p: &dyn ScoringSystem,
    c: &FairnessContract,
    actual: &[f64],
    cfg: &FalsifierConfig,
    proposals: &mut dyn InputProposal,
) -> Result<FairnessVerdict, FairnessError> {
    let run_out = fairness_monitor(p, c, &[actual.to_vec()], cfg, proposals)?;
    let system_output = run(p, actual)?;
    let synthetic = run_out.best.synthetic;
    let counterpart_output = run(p, &synthetic)?;
    let bound = c.bound(actual, &synthetic);
    Ok(FairnessVerdict {
        system_output,
        score: run_out.best.score,
        normalized: normalize(run_out.best.score, bound),
        counterpart: synthetic,
        counterpart_output,
        bound,
        d_out: c.d_out.between_scalars(system_output, counterpart_output),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    /// Largest `dOut / dIn` over all grid pairs; the smallest admissible constant.
    pub max_ratio: f64,
    pub argmax: Option<(usize, usize)>,
    /// First pair violating `dOut ≤ L · dIn`.
    pub violation: Option<(usize, usize)>,
}

impl LipschitzReport {
    pub fn is_clean(&self) -> bool {
        self.violation.is_none()
    }
}

pub fn lipschitz_check(
    p: &dyn ScoringSystem,
    d_in: &Distance,
    d_out: &Distance,
    l: f64,
    grid: &[Vec<f64>],
) -> Result<LipschitzReport, FairnessError> {
    if l.is_nan() || l <= 0.0 {
        return Err(FairnessError::Config(format!(
            "Lipschitz constant must be positive, got {l}"
        )));
    }
    let outs = grid
        .iter()
        .map(|i| run(p, i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = LipschitzReport {
        max_ratio: 0.0,
        argmax: None,
        violation: None,
    };
    for a in 0..grid.len() {
        for b in a + 1..grid.len() {
            let din = d_in.between_vectors(&grid[a], &grid[b]);
            let dout = d_out.between_scalars(outs[a], outs[b]);
            if report.violation.is_none() && dout > l * din {
                report.violation = Some((a, b));
            }
            if dout == 0.0 {
                continue;
            }
            let ratio = if din == 0.0 {
                f64::INFINITY
            } else {
                dout / din
            };
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.argmax = Some((a, b));
            }
        }
    }
    Ok(report)
}

/// Piecewise-linear interpolation through `(x, y)` anchor points.
fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let k = points
        .windows(2)
        .position(|w| x <= w[1].0)
        .unwrap_or(points.len() - 2);
    let ((x0, y0), (x1, y1)) = (points[k], points[k + 1]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

const SUBSCORE: [(f64, f64); 3] = [(0.0, 0.0), (0.8, 0.192), (1.0, 0.18)];
const SKILL: [(f64, f64); 6] = [
    (0.0, 0.0),
    (0.1, 0.02),
    (0.19, 0.02),
    (0.2, 0.05),
    (0.5, 0.05),
    (1.0, 0.15),
];
const SKILL_PRIME: [(f64, f64); 6] = [
    (0.0, 0.0),
    (0.1, 0.01),
    (0.13, 0.01),
    (0.135, 0.19),
    (0.5, 0.19),
    (1.0, 0.2),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HrVariant {
    /// Small skill jump just below 0.2.
    P,
    /// Large skill jump at 0.13.
    PPrime,
}

/// Reference HR scoring system on five marks in `[0, 1]`: education, experience,
/// personality, mental ability and skill. The total is the sum of five subscores.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HrSystem {
    pub variant: HrVariant,
}

pub const JOHN: [f64; 5] = [0.5, 0.5, 0.5, 0.5, 0.2];
pub const SYNTHIA: [f64; 5] = [0.5, 0.5, 0.5, 0.5, 0.19];
pub const SYNCLAIR: [f64; 5] = [0.5, 0.5, 0.5, 0.5, 0.13];

impl HrSystem {
    pub fn new(variant: HrVariant) -> Self {
        HrSystem { variant }
    }

    pub fn skill(&self, sk: f64) -> f64 {
        match self.variant {
            HrVariant::P => interpolate(&SKILL, sk),
            HrVariant::PPrime => interpolate(&SKILL_PRIME, sk),
        }
    }
}

impl ScoringSystem for HrSystem {
    fn dim(&self) -> usize {
        5
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); 5]
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64, SystemError> {
        self.check(x)?;
        let base: f64 = x[..4].iter().map(|&m| interpolate(&SUBSCORE, m)).sum();
        Ok(base + self.skill(x[4]))
    }
}

/// Grid through one individual: every axis line at `step`, plus the box of radius
/// `radius` around it at the same step, clipped to `[0, 1]`.
pub fn slice_grid(center: &[f64], step: f64, radius: f64) -> Vec<Vec<f64>> {
    let n = (1.0 / step).round() as i64;
    let mut grid = Vec::new();
    for axis in 0..center.len() {
        for k in 0..=n {
            let mut g = center.to_vec();
            g[axis] = k as f64 * step;
            grid.push(g);
        }
    }
    let r = (radius / step).round() as i64;
    let offsets: Vec<f64> = (-r..=r).map(|k| k as f64 * step).collect();
    let mut idx = vec![0usize; center.len()];
    loop {
        let g: Vec<f64> = center
            .iter()
            .zip(&idx)
            .map(|(c, &i)| c + offsets[i])
            .collect();
        if g.iter().all(|&v| (0.0..=1.0).contains(&v)) {
            grid.push(g);
        }
        let mut d = 0;
        while d < idx.len() {
            idx[d] += 1;
            if idx[d] < offsets.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == idx.len() {
            break;
        }
    }
    grid
}

/// Scores a finite table of inputs; other inputs take the output of the nearest row
/// (Euclidean, first row on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct TableSystem {
    rows: Vec<(Vec<f64>, f64)>,
    bounds: Vec<(f64, f64)>,
}

impl TableSystem {
    pub fn new(rows: Vec<(Vec<f64>, f64)>) -> Result<Self, FairnessError> {
        let dim = rows
            .first()
            .ok_or_else(|| FairnessError::Table("no rows".into()))?
            .0
            .len();
        if dim == 0 || rows.iter().any(|(x, _)| x.len() != dim) {
            return Err(FairnessError::Table(
                "rows must share a non-zero dimension".into(),
            ));
        }
        if rows
            .iter()
            .any(|(x, o)| !o.is_finite() || x.iter().any(|v| !v.is_finite()))
        {
            return Err(FairnessError::Table("values must be finite".into()));
        }
        let bounds = (0..dim)
            .map(|k| {
                rows.iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| {
                        (lo.min(x[k]), hi.max(x[k]))
                    })
            })
            .collect();
        Ok(TableSystem { rows, bounds })
    }

    /// CSV with a header; every column but the last is an input component.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, FairnessError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| FairnessError::Table(format!("row {}: {e}", k + 2)))?;
            let vals = rec
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| FairnessError::Table(format!("row {}: {e}", k + 2)))?;
            let (out, input) = vals
                .split_last()
                .ok_or_else(|| FairnessError::Table(format!("row {}: empty", k + 2)))?;
            rows.push((input.to_vec(), *out));
        }
        TableSystem::new(rows)
    }

    pub fn load(path: &Path) -> Result<Self, FairnessError> {
        let f = std::fs::File::open(path)
            .map_err(|e| FairnessError::Table(format!("{}: {e}", path.display())))?;
        TableSystem::read_csv(f)
    }

    pub fn rows(&self) -> &[(Vec<f64>, f64)] {
        &self.rows
    }

    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|(x, _)| x.clone()).collect()
    }
}

impl ScoringSystem for TableSystem {
    fn dim(&self) -> usize {
        self.bounds.len()
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        self.bounds.clone()
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64, SystemError> {
        if x.len() != self.dim() {
            return Err(SystemError::Dimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        let mut best = (f64::INFINITY, 0.0);
        for (row, out) in &self.rows {
            let d: f64 = row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, *out);
            }
        }
        Ok(best.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    struct Constant;
    impl ScoringSystem for Constant {
        fn dim(&self) -> usize {
            2
        }
        fn bounds(&self) -> Vec<(f64, f64)> {
            vec![(0.0, 1.0); 2]
        }
        fn evaluate(&self, x: &[f64]) -> Result<f64, SystemError> {
            self.check(x)?;
            Ok(0.4)
        }
    }

    #[test]
    fn reference_f_values() {
        let f = reference_f();
        assert!((f.eval(0.0) - 0.001).abs() < 1e-15);
        assert!((f.eval(0.0313) - 0.1262).abs() < 1e-12);
        assert!((f.eval(0.0045) - 0.037).abs() < 1e-12);
    }

    #[test]
    fn reference_scores() {
        let p = HrSystem::new(HrVariant::P);
        let q = HrSystem::new(HrVariant::PPrime);
        assert!((p.evaluate(&JOHN).unwrap() - 0.53).abs() < 1e-9);
        assert!((p.evaluate(&SYNTHIA).unwrap() - 0.50).abs() < 1e-9);
        assert!((q.evaluate(&JOHN).unwrap() - 0.67).abs() < 1e-9);
        assert!((q.evaluate(&SYNCLAIR).unwrap() - 0.49).abs() < 1e-9);
        assert!(matches!(
            p.evaluate(&JOHN[..4]),
            Err(SystemError::Dimension {
                expected: 5,
                found: 4
            })
        ));
        assert!(p.evaluate(&[1.2, 0.5, 0.5, 0.5, 0.5]).is_err());
    }

    #[test]
    fn identical_inputs_score_f_of_zero() {
        let c = FairnessContract::reference();
        let p = HrSystem::new(HrVariant::PPrime);
        assert!((fairness_score(&p, &c, &JOHN, &JOHN).unwrap() - 0.001).abs() < 1e-15);
    }

    #[test]
    fn normalisation_policy() {
        assert_eq!(normalize(0.0, 0.0), 0.0);
        assert_eq!(normalize(-0.1, 0.0), f64::NEG_INFINITY);
        assert_eq!(normalize(0.5, 0.5), 1.0);
        assert_eq!(normalize(-0.5, 0.25), -2.0);
        assert_eq!(normalize(f64::INFINITY, f64::INFINITY), 1.0);
    }

    #[test]
    fn normalized_minus_one_means_double_the_limit() {
        // dOut = 2·f(dIn) ⇔ F = −f(dIn) ⇔ normalised −1
        let bound = 0.125;
        let score = ext::sub(bound, 2.0 * bound);
        assert_eq!(normalize(score, bound), -1.0);
    }

    #[test]
    fn constant_system_is_never_unfair() {
        let c = FairnessContract {
            d_in: Distance::EuclidNormalized { dim: 2 },
            d_out: Distance::AbsScalar,
            f: PiecewiseLinear::linear(1.0),
        };
        let cfg = FalsifierConfig::new(1.0, 500, 9).unwrap();
        let mut ps = ComponentProposal::for_system(&Constant, 0.2);
        let run = fairness_monitor(&Constant, &c, &[vec![0.5, 0.5]], &cfg, &mut ps).unwrap();
        assert!(run.best.score >= 0.0);
        let report = lipschitz_check(
            &Constant,
            &c.d_in,
            &c.d_out,
            1.0,
            &[vec![0.0, 0.0], vec![1.0, 1.0]],
        )
        .unwrap();
        assert!(report.is_clean());
        assert_eq!(report.max_ratio, 0.0);
    }

    #[test]
    fn monitor_errors_carry_input() {
        let c = FairnessContract::reference();
        let cfg = FalsifierConfig::new(1.0, 10, 0).unwrap();
        let mut bad = |_: &[f64], _: f64, _: &mut SearchRng| vec![2.0; 5];
        let err = fairness_monitor(
            &HrSystem::new(HrVariant::P),
            &c,
            &[JOHN.to_vec()],
            &cfg,
            &mut bad,
        )
        .unwrap_err();
        assert!(matches!(err, FairnessError::System { input, .. } if input == vec![2.0; 5]));
        let err =
            fairness_monitor(&HrSystem::new(HrVariant::P), &c, &[], &cfg, &mut bad).unwrap_err();
        assert!(matches!(err, FairnessError::NoActualInputs));
    }

    #[test]
    fn table_nearest_row() {
        let t = TableSystem::read_csv("x,y,out\n0,0,1\n1,1,2\n".as_bytes()).unwrap();
        assert_eq!(t.evaluate(&[0.2, 0.1]).unwrap(), 1.0);
        assert_eq!(t.evaluate(&[0.9, 0.8]).unwrap(), 2.0);
        assert_eq!(t.evaluate(&[0.5, 0.5]).unwrap(), 1.0);
        assert!(TableSystem::read_csv("x,out\n".as_bytes()).is_err());
    }

    #[test]
    fn slice_grid_contains_axes_and_box() {
        let g = slice_grid(&JOHN, 0.01, 0.03);
        assert_eq!(g.len(), 5 * 101 + 7usize.pow(5));
        assert!(g
            .iter()
            .any(|x| (x[4] - 0.13).abs() < 1e-12 && x[..4] == JOHN[..4]));
    }

    proptest! {
        #[test]
        fn score_is_symmetric(a in proptest::collection::vec(0.0f64..1.0, 5), b in proptest::collection::vec(0.0f64..1.0, 5)) {
            let c = FairnessContract::reference();
            let p = HrSystem::new(HrVariant::PPrime);
            let ab = fairness_score(&p, &c, &a, &b).unwrap();
            let ba = fairness_score(&p, &c, &b, &a).unwrap();
            prop_assert_eq!(ab.to_bits(), ba.to_bits());
        }

        #[test]
        fn normalized_never_exceeds_one(score in -1.0f64..1.0, bound in 1e-6f64..1.0) {
            let s = score.min(bound);
            prop_assert!(normalize(s, bound) <= 1.0);
            prop_assert_eq!(normalize(s, bound) >= 0.0, s >= 0.0);
        }

        #[test]
        fn monitor_minimum_matches_log(seed in any::<u64>()) {
            let c = FairnessContract::reference();
            let p = HrSystem::new(HrVariant::PPrime);
            let cfg = FalsifierConfig::new(20.0, 300, seed).unwrap();
            let mut ps = ComponentProposal::for_system(&p, 0.05);
            let run = fairness_monitor(&p, &c, &[JOHN.to_vec(), SYNTHIA.to_vec()], &cfg, &mut ps).unwrap();
            let min = run.log.iter().map(|x| x.score).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(min, run.best.score);
            let again = fairness_score(&p, &c, &run.best.actual, &run.best.synthetic).unwrap();
            prop_assert_eq!(again.to_bits(), run.best.score.to_bits());
        }
    }
}
