//! Monte-Carlo Markov chain falsification.
//!
//! [`falsify`] minimises a robustness function by Metropolis acceptance: a proposal
//! `w'` replaces `w` when a uniform `r ∈ (0, 1]` satisfies `r ≤ exp(-β(R(w') - R(w)))`.
//! The chain stops as soon as the current robustness is strictly negative or the
//! iteration budget is spent, and always reports the smallest robustness it has seen.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ext;

pub type SearchRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SearchRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Error)]
pub enum FalsifyError<S: std::fmt::Debug, E: std::fmt::Display> {
    #[error("candidate outside the robustness function's domain: {source}")]
    OutsideDomain { candidate: S, source: E },
    #[error("robustness function returned NaN")]
    NotANumber { candidate: S },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Adaptation {
    pub window: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FalsifierConfig {
    pub beta: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub adaptation: Option<Adaptation>,
}

impl FalsifierConfig {
    pub fn new(beta: f64, max_iterations: usize, seed: u64) -> Result<Self, String> {
        let cfg = FalsifierConfig {
            beta,
            max_iterations,
            seed,
            adaptation: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(format!("beta must be a positive real, got {}", self.beta));
        }
        if self.max_iterations == 0 {
            return Err("max_iterations must be at least 1".into());
        }
        if let Some(a) = self.adaptation {
            if a.window == 0 || !a.factor.is_finite() || a.factor <= 0.0 {
                return Err("adaptation needs window >= 1 and a positive factor".into());
            }
        }
        Ok(())
    }
}

impl Default for FalsifierConfig {
    fn default() -> Self {
        FalsifierConfig {
            beta: 1.0,
            max_iterations: 3000,
            seed: 0,
            adaptation: None,
        }
    }
}

/// Proposes the next candidate from the current one.
pub trait ProposalScheme<S> {
    fn propose(&mut self, current: &S, rng: &mut SearchRng) -> S;
}

impl<S, F> ProposalScheme<S> for F
where
    F: FnMut(&S, &mut SearchRng) -> S,
{
    fn propose(&mut self, current: &S, rng: &mut SearchRng) -> S {
        self(current, rng)
    }
}

/// One evaluated candidate. Iteration 0 is the initial candidate and counts as accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Step {
    pub iteration: usize,
    pub robustness: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FalsificationOutcome<S> {
    pub min_robustness: f64,
    pub argmin: S,
    pub iterations_used: usize,
    pub falsified: bool,
    pub history: Vec<Step>,
}

impl<S> FalsificationOutcome<S> {
    /// `iteration,robustness,accepted` rows with a header line.
    pub fn report_csv(&self) -> String {
        let mut out = String::from("iteration,robustness,accepted\n");
        for s in &self.history {
            out.push_str(&format!(
                "{},{},{}\n",
                s.iteration,
                ext::render(s.robustness),
                s.accepted
            ));
        }
        out
    }
}

fn eval<S: Clone + std::fmt::Debug, E: std::fmt::Display>(
    r: &mut impl FnMut(&S) -> Result<f64, E>,
    s: &S,
) -> Result<f64, FalsifyError<S, E>> {
    match r(s) {
        Ok(v) if v.is_nan() => Err(FalsifyError::NotANumber {
            candidate: s.clone(),
        }),
        Ok(v) => Ok(v),
        Err(source) => Err(FalsifyError::OutsideDomain {
            candidate: s.clone(),
            source,
        }),
    }
}

/// Metropolis acceptance with a shared generator; `r` is drawn from `(0, 1]` so an
/// acceptance probability of exactly 0 never accepts.
pub fn metropolis_accept(beta: f64, current: f64, proposed: f64, rng: &mut SearchRng) -> bool {
    let alpha = (-beta * ext::sub(proposed, current)).exp();
    let r = 1.0 - rng.gen::<f64>();
    r <= alpha
}

pub fn falsify<S, E, R, P>(
    mut robustness: R,
    initial: S,
    proposals: &mut P,
    cfg: &FalsifierConfig,
) -> Result<FalsificationOutcome<S>, FalsifyError<S, E>>
where
    S: Clone + std::fmt::Debug,
    E: std::fmt::Display,
    R: FnMut(&S) -> Result<f64, E>,
    P: ProposalScheme<S> + ?Sized,
{
    cfg.validate().map_err(FalsifyError::Config)?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut beta = cfg.beta;
    let mut current = initial;
    let mut rho = eval(&mut robustness, &current)?;
    let mut best = (rho, current.clone());
    let mut history = vec![Step {
        iteration: 0,
        robustness: rho,
        accepted: true,
    }];
    let mut iterations = 0;
    let mut stale = 0;
    while (rho >= 0.0 || rho.is_nan()) && iterations < cfg.max_iterations {
        iterations += 1;
        let candidate = proposals.propose(&current, &mut rng);
        let rho_new = eval(&mut robustness, &candidate)?;
        let accepted = metropolis_accept(beta, rho, rho_new, &mut rng);
        history.push(Step {
            iteration: iterations,
            robustness: rho_new,
            accepted,
        });
        if rho_new < best.0 {
            best = (rho_new, candidate.clone());
            stale = 0;
        } else {
            stale += 1;
        }
        if accepted {
            current = candidate;
            rho = rho_new;
        }
        if let Some(a) = cfg.adaptation {
            if stale >= a.window {
                beta *= a.factor;
                stale = 0;
            }
        }
    }
    Ok(FalsificationOutcome {
        min_robustness: best.0,
        falsified: best.0 < 0.0,
        argmin: best.1,
        iterations_used: iterations,
        history,
    })
}

/// Runs `restarts` independent chains with seeds `seed, seed+1, …` on separate threads.
/// Results come back in seed order.
pub fn falsify_restarts<S, E, F>(
    restarts: usize,
    cfg: &FalsifierConfig,
    run: F,
) -> Vec<Result<FalsificationOutcome<S>, FalsifyError<S, E>>>
where
    S: Send + std::fmt::Debug,
    E: Send + std::fmt::Display,
    F: Fn(&FalsifierConfig) -> Result<FalsificationOutcome<S>, FalsifyError<S, E>> + Sync,
{
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..restarts as u64)
            .map(|k| {
                let mut c = *cfg;
                c.seed = cfg.seed.wrapping_add(k);
                let run = &run;
                scope.spawn(move || run(&c))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("falsification thread panicked"))
            .collect()
    })
}

/// Index of the outcome with the smallest robustness; ties go to the earlier seed.
pub fn best_outcome<S>(outcomes: &[FalsificationOutcome<S>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, o) in outcomes.iter().enumerate() {
        if best.is_none_or(|b| o.min_robustness < outcomes[b].min_robustness) {
            best = Some(k);
        }
    }
    best
}

/// `In_{Std,κi}` for scalar profiles: candidates that stay inside the tube
/// `[s(t) − κi, s(t) + κi]` of some standard profile `s` at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedInputSpace {
    std: Vec<Vec<f64>>,
    kappa_in: f64,
}

impl RestrictedInputSpace {
    pub fn new(std: Vec<Vec<f64>>, kappa_in: f64) -> Result<Self, String> {
        let n = std
            .first()
            .ok_or("restricted space needs a standard profile")?
            .len();
        if n == 0 || std.iter().any(|s| s.len() != n) {
            return Err("standard profiles must be non-empty and share one horizon".into());
        }
        if kappa_in.is_nan() || kappa_in < 0.0 {
            return Err(format!("kappa_in must be non-negative, got {kappa_in}"));
        }
        Ok(RestrictedInputSpace { std, kappa_in })
    }

    pub fn horizon(&self) -> usize {
        self.std[0].len()
    }

    pub fn kappa_in(&self) -> f64 {
        self.kappa_in
    }

    pub fn standards(&self) -> &[Vec<f64>] {
        &self.std
    }

    fn bounds(&self, s: f64) -> (f64, f64) {
        (s - self.kappa_in, s + self.kappa_in)
    }

    fn in_tube(&self, s: &[f64], w: &[f64]) -> bool {
        s.iter().zip(w).all(|(&x, &y)| {
            let (lo, hi) = self.bounds(x);
            lo <= y && y <= hi
        })
    }

    /// Index of the first standard profile whose tube contains `w`.
    pub fn witness(&self, w: &[f64]) -> Option<usize> {
        if w.len() != self.horizon() {
            return None;
        }
        self.std.iter().position(|s| self.in_tube(s, w))
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        self.witness(w).is_some()
    }

    /// Clamps every sample into the tube of `std[k]`, intersected with `[0, ∞)`.
    pub fn clamp_into(&self, k: usize, w: &mut [f64]) {
        for (y, &x) in w.iter_mut().zip(&self.std[k]) {
            let (lo, hi) = self.bounds(x);
            *y = y.clamp(lo.max(0.0), hi.max(0.0));
        }
    }
}

/// Shifts a uniformly placed window of `window` samples by one uniform offset in
/// `[-step_bound, step_bound]`, then clamps back into the restricted space.
#[derive(Debug, Clone)]
pub struct ProfileProposal {
    pub space: RestrictedInputSpace,
    pub window: usize,
    pub step_bound: f64,
}

impl ProposalScheme<Vec<f64>> for ProfileProposal {
    fn propose(&mut self, current: &Vec<f64>, rng: &mut SearchRng) -> Vec<f64> {
        propose_profile(current, &self.space, self.window, self.step_bound, rng)
    }
}

pub fn propose_profile(
    w: &[f64],
    space: &RestrictedInputSpace,
    window: usize,
    step_bound: f64,
    rng: &mut SearchRng,
) -> Vec<f64> {
    let mut next = w.to_vec();
    if step_bound <= 0.0 || w.is_empty() {
        return next;
    }
    let len = window.clamp(1, w.len());
    let start = rng.gen_range(0..=w.len() - len);
    let offset = rng.gen_range(-step_bound..=step_bound);
    for y in &mut next[start..start + len] {
        *y += offset;
    }
    let k = space.witness(w).unwrap_or(0);
    space.clamp_into(k, &mut next);
    next
}

/// A cheap model standing in for the real system during search.
pub trait SurrogateModel<S> {
    type Output;
    type Error: std::fmt::Display;
    fn predict(&self, candidate: &S) -> Result<Self::Output, Self::Error>;
    /// Feeds back a validated observation.
    fn learn(&mut self, candidate: &S, observed: &Self::Output);
}

/// The authoritative system, e.g. a physical test bench. `None` means it is unavailable.
pub trait Validator<S, O> {
    fn observe(&mut self, candidate: &S) -> Option<O>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundVerdict {
    /// No counterexample within the budget; only the minimum is reported.
    Timeout,
    /// Counterexample on the model, no validator to confirm it.
    ModelOnly,
    Confirmed,
    /// The validator disagrees; its observation was fed back to the model.
    Disagreement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport<S> {
    pub round: usize,
    pub verdict: RoundVerdict,
    pub model_robustness: f64,
    pub validated_robustness: Option<f64>,
    pub candidate: S,
    pub iterations: usize,
}

/// Falsifies against the model, re-checks counterexamples on the validator, and retrains
/// on disagreement. Round `k` uses seed `cfg.seed + k`.
pub fn surrogate_loop<S, M, V, P>(
    model: &mut M,
    mut validator: Option<&mut V>,
    robustness: impl Fn(&S, &M::Output) -> f64,
    initial: S,
    proposals: &mut P,
    cfg: &FalsifierConfig,
    max_rounds: usize,
) -> Result<Vec<RoundReport<S>>, FalsifyError<S, M::Error>>
where
    S: Clone + std::fmt::Debug,
    M: SurrogateModel<S>,
    V: Validator<S, M::Output> + ?Sized,
    P: ProposalScheme<S>,
{
    let mut rounds = Vec::new();
    for round in 0..max_rounds.max(1) {
        let mut c = *cfg;
        c.seed = cfg.seed.wrapping_add(round as u64);
        let m: &M = model;
        let out = falsify(
            |s: &S| m.predict(s).map(|o| robustness(s, &o)),
            initial.clone(),
            proposals,
            &c,
        )?;
        let mut report = RoundReport {
            round,
            verdict: RoundVerdict::Timeout,
            model_robustness: out.min_robustness,
            validated_robustness: None,
            candidate: out.argmin.clone(),
            iterations: out.iterations_used,
        };
        if !out.falsified {
            rounds.push(report);
            break;
        }
        let observed = validator.as_mut().and_then(|v| v.observe(&out.argmin));
        let Some(observed) = observed else {
            report.verdict = RoundVerdict::ModelOnly;
            rounds.push(report);
            break;
        };
        let rho = robustness(&out.argmin, &observed);
        report.validated_robustness = Some(rho);
        if rho < 0.0 {
            report.verdict = RoundVerdict::Confirmed;
            rounds.push(report);
            break;
        }
        report.verdict = RoundVerdict::Disagreement;
        model.learn(&out.argmin, &observed);
        rounds.push(report);
    }
    Ok(rounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
    use std::convert::Infallible;

    fn step(x: &f64, _: &mut SearchRng) -> f64 {
        x + 0.15
    }

    #[test]
    fn linear_descent_falsifies_at_seventh_step() {
        for beta in [0.1, 1.0, 50.0] {
            let cfg = FalsifierConfig::new(beta, 100, 1).unwrap();
            let out =
                falsify(|x: &f64| Ok::<_, Infallible>(1.0 - x), 0.0, &mut step, &cfg).unwrap();
            assert!(out.falsified);
            assert_eq!(out.iterations_used, 7);
            assert!((out.argmin - 1.05).abs() < 1e-12);
            assert!((out.min_robustness + 0.05).abs() < 1e-12);
            assert!(out.history.iter().all(|s| s.accepted));
        }
    }

    #[test]
    fn constant_robustness_never_falsifies() {
        let cfg = FalsifierConfig::new(1.0, 50, 3).unwrap();
        let out = falsify(|_: &f64| Ok::<_, Infallible>(1.0), 0.0, &mut step, &cfg).unwrap();
        assert!(!out.falsified);
        assert_eq!(out.min_robustness, 1.0);
        assert_eq!(out.iterations_used, 50);
    }

    #[test]
    fn negative_start_stops_immediately() {
        let cfg = FalsifierConfig::default();
        let out = falsify(|x: &f64| Ok::<_, Infallible>(*x), -1.0, &mut step, &cfg).unwrap();
        assert!(out.falsified);
        assert_eq!(out.iterations_used, 0);
        assert_eq!(out.history.len(), 1);
    }

    #[test]
    fn zero_robustness_keeps_searching() {
        let cfg = FalsifierConfig::new(1.0, 5, 0).unwrap();
        let out = falsify(|_: &f64| Ok::<_, Infallible>(0.0), 0.0, &mut step, &cfg).unwrap();
        assert!(!out.falsified);
        assert_eq!(out.iterations_used, 5);
    }

    #[test]
    fn domain_errors_carry_candidate() {
        let cfg = FalsifierConfig::default();
        let err = falsify(
            |x: &f64| if *x > 0.2 { Err("too far") } else { Ok(1.0) },
            0.0,
            &mut step,
            &cfg,
        )
        .unwrap_err();
        match err {
            FalsifyError::OutsideDomain { candidate, .. } => {
                assert!((candidate - 0.3).abs() < 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(FalsifierConfig::new(0.0, 1, 0).is_err());
        assert!(FalsifierConfig::new(1.0, 0, 0).is_err());
        let c = FalsifierConfig {
            adaptation: Some(Adaptation {
                window: 0,
                factor: 2.0,
            }),
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn infinite_robustness_is_never_worse_than_itself() {
        let mut rng = rng_from_seed(0);
        assert!(metropolis_accept(
            1.0,
            f64::INFINITY,
            f64::INFINITY,
            &mut rng
        ));
        for _ in 0..100 {
            assert!(!metropolis_accept(1.0, 0.0, f64::INFINITY, &mut rng));
        }
    }

    #[test]
    fn restarts_merge_by_minimum_then_seed() {
        let cfg = FalsifierConfig::new(1.0, 20, 10).unwrap();
        let outs: Vec<_> = falsify_restarts(4, &cfg, |c| {
            let seed = c.seed;
            falsify(
                move |_: &f64| Ok::<_, Infallible>(if seed % 2 == 1 { 0.5 } else { 1.0 }),
                0.0,
                &mut step,
                c,
            )
        })
        .into_iter()
        .map(Result::unwrap)
        .collect();
        assert_eq!(best_outcome(&outs), Some(1));
    }

    fn space() -> RestrictedInputSpace {
        RestrictedInputSpace::new(vec![vec![0.0, 10.0, 20.0, 30.0, 20.0, 10.0, 0.0]], 5.0).unwrap()
    }

    #[test]
    fn membership_boundaries() {
        let s = space();
        let std = s.standards()[0].clone();
        assert!(s.contains(&std));
        let up: Vec<f64> = std.iter().map(|x| x + 5.0).collect();
        assert!(s.contains(&up));
        let mut out = std.clone();
        out[3] += 6.0;
        assert!(!s.contains(&out));
        assert!(!s.contains(&std[..3]));
    }

    #[test]
    fn zero_step_leaves_profile_unchanged() {
        let s = space();
        let w = s.standards()[0].clone();
        let mut rng = rng_from_seed(42);
        assert_eq!(propose_profile(&w, &s, 3, 0.0, &mut rng), w);
    }

    #[test]
    fn seeded_proposals_are_reproducible() {
        let s = space();
        let w = s.standards()[0].clone();
        let run = || {
            let mut rng = rng_from_seed(42);
            let mut x = w.clone();
            for _ in 0..50 {
                x = propose_profile(&x, &s, 10, 5.0, &mut rng);
            }
            x
        };
        let a = run();
        let b = run();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    struct Planted {
        bad: bool,
    }

    impl SurrogateModel<f64> for Planted {
        type Output = f64;
        type Error = Infallible;
        fn predict(&self, x: &f64) -> Result<f64, Infallible> {
            Ok(if self.bad && *x > 0.5 { -1.0 } else { 1.0 })
        }
        fn learn(&mut self, _: &f64, _: &f64) {
            self.bad = false;
        }
    }

    struct Truth;
    impl Validator<f64, f64> for Truth {
        fn observe(&mut self, _: &f64) -> Option<f64> {
            Some(1.0)
        }
    }

    struct Same;
    impl Validator<f64, f64> for Same {
        fn observe(&mut self, x: &f64) -> Option<f64> {
            Planted { bad: true }.predict(x).ok()
        }
    }

    #[test]
    fn surrogate_disagreement_triggers_second_round() {
        let mut model = Planted { bad: true };
        let cfg = FalsifierConfig::new(1.0, 30, 0).unwrap();
        let rounds = surrogate_loop(
            &mut model,
            Some(&mut Truth),
            |_, o| *o,
            0.0,
            &mut step,
            &cfg,
            5,
        )
        .unwrap();
        assert_eq!(rounds.len(), 2);
        assert_eq!(rounds[0].verdict, RoundVerdict::Disagreement);
        assert_eq!(rounds[1].verdict, RoundVerdict::Timeout);
    }

    #[test]
    fn surrogate_agreement_and_model_only() {
        let cfg = FalsifierConfig::new(1.0, 30, 0).unwrap();
        let mut model = Planted { bad: true };
        let r = surrogate_loop(
            &mut model,
            Some(&mut Same),
            |_, o| *o,
            0.0,
            &mut step,
            &cfg,
            5,
        )
        .unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].verdict, RoundVerdict::Confirmed);
        let r = surrogate_loop::<f64, _, Truth, _>(
            &mut model,
            None,
            |_, o| *o,
            0.0,
            &mut step,
            &cfg,
            5,
        )
        .unwrap();
        assert_eq!(r[0].verdict, RoundVerdict::ModelOnly);
        let mut clean = Planted { bad: false };
        let r = surrogate_loop(
            &mut clean,
            Some(&mut Truth),
            |_, o| *o,
            0.0,
            &mut step,
            &cfg,
            5,
        )
        .unwrap();
        assert_eq!(r[0].verdict, RoundVerdict::Timeout);
        assert_eq!(r[0].model_robustness, 1.0);
    }

    proptest! {
        #[test]
        fn proposals_stay_in_space(seed in any::<u64>(), window in 1usize..10, bound in 0.0f64..20.0) {
            let s = space();
            let mut rng = rng_from_seed(seed);
            let mut w = s.standards()[0].clone();
            for _ in 0..20 {
                w = propose_profile(&w, &s, window, bound, &mut rng);
                prop_assert!(s.contains(&w));
                prop_assert!(w.iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn history_minimum_matches_outcome(seed in any::<u64>(), beta in 0.1f64..10.0) {
            let cfg = FalsifierConfig::new(beta, 200, seed).unwrap();
            let mut ps = |x: &f64, rng: &mut SearchRng| x + rng.gen_range(-0.3..0.3);
            let out = falsify(|x: &f64| Ok::<_, Infallible>(1.0 + (x * 3.0).sin() - 0.2 * x), 0.0, &mut ps, &cfg).unwrap();
            let min = out.history.iter().map(|s| s.robustness).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(min, out.min_robustness);
            prop_assert_eq!(out.falsified, out.min_robustness < 0.0);
            if out.falsified {
                prop_assert!(1.0 + (out.argmin * 3.0).sin() - 0.2 * out.argmin < 0.0);
            }
        }
    }
}
