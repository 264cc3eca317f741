use doping_core::emissions::*;
use doping_core::falsify::FalsifierConfig;
use std::time::Instant;

fn planted() -> (EmissionContext, NoxPredictor) {
    let p = synthetic_predictor(Some((58.0, 62.0)), 100.0);
    let ctx = EmissionContext::measured(&p, synthetic_cycle(), 15.0, 88.0).unwrap();
    (ctx, p)
}

#[test]
fn planted_band_is_found() {
    let (ctx, p) = planted();
    let cfg = FalsifierConfig::new(1.0, 3000, 42).unwrap();
    let start = Instant::now();
    let run = falsify_emissions(&ctx, &p, &cfg, 10, 5.0).unwrap();
    println!(
        "std {} min {} iters {} probes {} elapsed {:?}",
        ctx.std_output,
        run.outcome.min_robustness,
        run.outcome.iterations_used,
        run.probes,
        start.elapsed()
    );
    assert!(run.outcome.falsified);
    assert_eq!(run.membership_violations, 0);
    assert!(ctx.space().contains(&run.outcome.argmin));
    assert!(nedc_robustness(&ctx, &p, &run.outcome.argmin).unwrap() < 0.0);
}

#[test]
fn clean_predictor_is_not_falsified() {
    let p = synthetic_predictor(None, 0.0);
    let ctx = EmissionContext::measured(&p, synthetic_cycle(), 15.0, 88.0).unwrap();
    let cfg = FalsifierConfig::new(1.0, 500, 42).unwrap();
    let run = falsify_emissions(&ctx, &p, &cfg, 10, 5.0).unwrap();
    assert!(!run.outcome.falsified);
    assert_eq!(run.membership_violations, 0);
}

#[test]
fn reports_are_reproducible() {
    let (ctx, p) = planted();
    let cfg = FalsifierConfig::new(1.0, 400, 5).unwrap();
    let a = falsify_emissions(&ctx, &p, &cfg, 10, 5.0).unwrap();
    let b = falsify_emissions(&ctx, &p, &cfg, 10, 5.0).unwrap();
    assert_eq!(a.outcome.report_csv(), b.outcome.report_csv());
    assert_eq!(
        a.plot_csv(&ctx.standard_cycle),
        b.plot_csv(&ctx.standard_cycle)
    );
}
