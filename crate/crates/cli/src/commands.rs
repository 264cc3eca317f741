use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use doping_core::cleanness::{build_psi, evaluate_phi, oracle, Clause, CleannessContext, StdForm};
use doping_core::contract::{Contract, ContractKind};
use doping_core::emissions::{
    cycle_emissions, falsify_emissions, load_cycle, nedc, EmissionContext, NoxPredictor,
    TripRecording,
};
use doping_core::fairness::{
    fairness_aware, ComponentProposal, FairnessContract, HrSystem, HrVariant, ScoringSystem,
    TableSystem,
};
use doping_core::falsify::{best_outcome, falsify, falsify_restarts, FalsifierConfig};
use doping_core::{ext, Trace};
use doping_oversight::service::case_seed;
use doping_oversight::{Service, ServiceConfig};
use rand::Rng;
use serde_json::json;

use crate::args::*;

/// Marks errors in the arguments themselves (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// What a finished command found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Finding {
    Clean,
    Violation,
}

/// Files written by one command and the summary printed for it.
pub struct Report {
    pub finding: Finding,
    pub primary: Option<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

fn search_config(s: &SearchArgs, seed: u64) -> Result<FalsifierConfig> {
    FalsifierConfig::new(s.beta, s.max_iter, seed).map_err(usage)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// `*.csv` files of a directory in name order.
fn load_traces(dir: &Path) -> Result<Vec<(String, Trace)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no trace files in {}", dir.display());
    }
    paths
        .into_iter()
        .map(|p| {
            let name = p
                .file_name()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            let t = Trace::load_csv(&p).with_context(|| format!("loading {}", p.display()))?;
            Ok((name, t))
        })
        .collect()
}

enum Ctx {
    Robust(doping_core::RobustContext),
    Func(doping_core::FuncContext),
}

fn cleanness_context(path: &Path) -> Result<Ctx> {
    let c = Contract::load(path)?;
    Ok(match c.kind() {
        ContractKind::Robust => Ctx::Robust(c.robust_context()?),
        ContractKind::Func => Ctx::Func(c.func_context()?),
        ContractKind::Fairness => bail!("{} is a fairness contract", path.display()),
    })
}

pub fn falsify_traces(a: &FalsifyArgs, seed: u64, out_dir: &Path) -> Result<Report> {
    let cfg = search_config(&a.search, seed)?;
    if a.restarts == 0 {
        return Err(usage("--restarts must be at least 1"));
    }
    let system = load_traces(&a.traces)?;
    match cleanness_context(&a.contract)? {
        Ctx::Robust(c) => falsify_with(&c, &system, &cfg, a, out_dir),
        Ctx::Func(c) => falsify_with(&c, &system, &cfg, a, out_dir),
    }
}

fn falsify_with(
    ctx: &(impl CleannessContext + Sync),
    system: &[(String, Trace)],
    cfg: &FalsifierConfig,
    a: &FalsifyArgs,
    out_dir: &Path,
) -> Result<Report> {
    let n = system.len();
    // The subject is a trace index; proposals jump to a different recorded trace.
    let run = |c: &FalsifierConfig| {
        let mut jump = |&i: &usize, rng: &mut doping_core::falsify::SearchRng| {
            if n == 1 {
                return i;
            }
            let j = rng.gen_range(0..n - 1);
            if j >= i {
                j + 1
            } else {
                j
            }
        };
        falsify(
            |&i: &usize| evaluate_phi(ctx, &system[i].1).map(|r| r.robustness),
            0usize,
            &mut jump,
            c,
        )
    };
    let outcomes = falsify_restarts(a.restarts, cfg, run)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| anyhow!("{e}"))?;
    let k = best_outcome(&outcomes).expect("at least one restart");
    let best = &outcomes[k];
    let report = out_dir.join(&a.out);
    write(&report, &best.report_csv())?;
    Ok(Report {
        finding: if best.falsified {
            Finding::Violation
        } else {
            Finding::Clean
        },
        primary: Some(report.clone()),
        outputs: vec![report],
        summary: json!({
            "falsified": best.falsified,
            "min_robustness": ext::render(best.min_robustness),
            "witness": system[best.argmin].0,
            "seed": cfg.seed.wrapping_add(k as u64),
            "iterations": best.iterations_used,
        }),
    })
}

pub fn run_oracle(a: &OracleArgs, out_dir: &Path) -> Result<Report> {
    let system = load_traces(&a.traces)?;
    match cleanness_context(&a.contract)? {
        Ctx::Robust(c) => oracle_with(&c, &system, a, out_dir),
        Ctx::Func(c) => oracle_with(&c, &system, a, out_dir),
    }
}

fn oracle_with(
    ctx: &impl CleannessContext,
    system: &[(String, Trace)],
    a: &OracleArgs,
    out_dir: &Path,
) -> Result<Report> {
    let traces: Vec<Trace> = system.iter().map(|(_, t)| t.clone()).collect();
    let names: Vec<&str> = system.iter().map(|(n, _)| n.as_str()).collect();
    let r = oracle(&traces, ctx)?;
    let describe = |v: &Option<doping_core::cleanness::Violation>| {
        v.as_ref().map(|v| {
            let closest = v.closest.map(|c| match v.clause {
                Clause::Upper => format!("std[{c}]"),
                Clause::Lower => names[c].to_string(),
            });
            json!({
                "standard": v.standard,
                "other": names[v.other],
                "closest": closest,
                "time": v.time,
            })
        })
    };
    let psi = |c| build_psi(ctx, c, StdForm::Context).evaluate(&traces, 0);
    let (lower, upper) = (psi(Clause::Lower)?, psi(Clause::Upper)?);
    let summary = json!({
        "clean": r.is_clean(),
        "lower": describe(&r.lower),
        "upper": describe(&r.upper),
        "psi_lower": { "holds": lower.boolean, "robustness": ext::render(lower.robustness) },
        "psi_upper": { "holds": upper.boolean, "robustness": ext::render(upper.robustness) },
    });
    let report = out_dir.join(&a.out);
    write(&report, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    Ok(Report {
        finding: if r.is_clean() {
            Finding::Clean
        } else {
            Finding::Violation
        },
        primary: Some(report.clone()),
        outputs: vec![report],
        summary,
    })
}

fn predictor(trips: &Path) -> Result<NoxPredictor> {
    let trips = TripRecording::load_dir(trips)?;
    let p = NoxPredictor::from_trips(&trips);
    if p.is_empty() {
        bail!("trip recordings contain no samples");
    }
    Ok(p)
}

fn cycle(path: &Option<PathBuf>) -> Result<Vec<f64>> {
    Ok(match path {
        Some(p) => load_cycle(p)?,
        None => nedc(),
    })
}

pub fn emissions_predict(a: &PredictArgs, out_dir: &Path) -> Result<Report> {
    let p = predictor(&a.trips)?;
    let e = cycle_emissions(&p, &cycle(&a.cycle)?)?;
    let summary = json!({
        "total_mg": e.total_mg,
        "distance_km": e.distance_km,
        "mg_per_km": e.mg_per_km,
    });
    let report = out_dir.join(&a.out);
    write(&report, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    Ok(Report {
        finding: Finding::Clean,
        primary: Some(report.clone()),
        outputs: vec![report],
        summary,
    })
}

pub fn emissions_falsify(a: &EmissionsFalsifyArgs, seed: u64, out_dir: &Path) -> Result<Report> {
    let cfg = search_config(&a.search, seed)?;
    if a.step_bound.is_nan() || a.step_bound < 0.0 || a.window == 0 {
        return Err(usage(
            "--window must be positive and --step-bound non-negative",
        ));
    }
    let p = predictor(&a.trips)?;
    let standard = cycle(&a.cycle)?;
    let ctx = match a.std_output {
        Some(o) => EmissionContext::new(standard, o, a.kappa_in, a.kappa_out),
        None => EmissionContext::measured(&p, standard, a.kappa_in, a.kappa_out),
    }
    .map_err(|e| usage(e.to_string()))?;
    let run =
        falsify_emissions(&ctx, &p, &cfg, a.window, a.step_bound).map_err(|e| anyhow!("{e}"))?;
    let report = out_dir.join(&a.out);
    let plot = out_dir.join(&a.plot);
    write(&report, &run.outcome.report_csv())?;
    write(&plot, &run.plot_csv(&ctx.standard_cycle))?;
    Ok(Report {
        finding: if run.outcome.falsified {
            Finding::Violation
        } else {
            Finding::Clean
        },
        primary: Some(report.clone()),
        outputs: vec![report, plot],
        summary: json!({
            "falsified": run.outcome.falsified,
            "min_robustness": ext::render(run.outcome.min_robustness),
            "std_output_mg_per_km": ctx.std_output,
            "iterations": run.outcome.iterations_used,
            "membership_violations": run.membership_violations,
            "uncovered_candidates": run.no_data,
        }),
    })
}

pub fn scoring_system(name: &str) -> Result<Arc<dyn ScoringSystem>> {
    Ok(match name {
        "p" => Arc::new(HrSystem::new(HrVariant::P)),
        "p-prime" => Arc::new(HrSystem::new(HrVariant::PPrime)),
        path => Arc::new(TableSystem::load(Path::new(path))?),
    })
}

pub fn fairness_contract(path: &Option<PathBuf>) -> Result<FairnessContract> {
    Ok(match path {
        Some(p) => Contract::load(p)?.fairness_contract()?,
        None => FairnessContract::reference(),
    })
}

/// Rows of `(case id, input)`; ids come from a `case_id`/`id` column or the row number.
fn actual_inputs(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let id_col = rdr
        .headers()?
        .iter()
        .position(|h| h == "case_id" || h == "id");
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let mut input = Vec::new();
        for (c, field) in rec.iter().enumerate() {
            if Some(c) == id_col {
                continue;
            }
            input.push(
                field
                    .parse::<f64>()
                    .with_context(|| format!("{}: row {}: {field:?}", path.display(), k + 2))?,
            );
        }
        let id = match id_col {
            Some(c) => rec[c].to_string(),
            None => (k + 1).to_string(),
        };
        rows.push((id, input));
    }
    Ok(rows)
}

pub fn fairness_monitor(a: &MonitorArgs, seed: u64, out_dir: &Path) -> Result<Report> {
    let system = scoring_system(&a.system)?;
    let contract = fairness_contract(&a.contract)?;
    let rows = actual_inputs(&a.inputs)?;
    let report = out_dir.join(&a.out);
    let mut w =
        csv::Writer::from_path(&report).with_context(|| format!("writing {}", report.display()))?;
    w.write_record(["case_id", "score", "normalized", "counterpart_json"])?;
    let mut flagged = Vec::new();
    for (id, input) in &rows {
        let s = &a.settings;
        let cfg = FalsifierConfig::new(s.beta, s.max_iter, case_seed(id, seed)).map_err(usage)?;
        let mut ps = ComponentProposal::for_system(system.as_ref(), s.step_bound);
        let v = fairness_aware(system.as_ref(), &contract, input, &cfg, &mut ps)
            .with_context(|| format!("case {id}"))?;
        if v.flagged() {
            flagged.push(id.clone());
        }
        w.write_record([
            id.clone(),
            ext::render(v.score),
            ext::render(v.normalized),
            serde_json::to_string(&v.counterpart)?,
        ])?;
    }
    w.flush()?;
    Ok(Report {
        finding: if flagged.is_empty() {
            Finding::Clean
        } else {
            Finding::Violation
        },
        primary: Some(report.clone()),
        outputs: vec![report],
        summary: json!({ "cases": rows.len(), "flagged": flagged }),
    })
}

pub fn serve(a: &ServeArgs, seed: u64) -> Result<Report> {
    let mut cfg = ServiceConfig::new(scoring_system(&a.system)?, fairness_contract(&a.contract)?);
    cfg.beta = a.settings.beta;
    cfg.max_iterations = a.settings.max_iter;
    cfg.step_bound = a.settings.step_bound;
    cfg.base_seed = seed;
    cfg.workers = a.workers;
    FalsifierConfig::new(cfg.beta, cfg.max_iterations, seed).map_err(usage)?;
    let service = Arc::new(Service::open(cfg, &a.store)?);
    let addr: std::net::SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| usage(format!("bad address: {e}")))?;
    let rt = tokio::runtime::Runtime::new()?;
    eprintln!("listening on http://{addr}");
    rt.block_on(doping_oversight::serve(service, addr))?;
    Ok(Report {
        finding: Finding::Clean,
        primary: None,
        outputs: vec![],
        summary: serde_json::Value::Null,
    })
}
