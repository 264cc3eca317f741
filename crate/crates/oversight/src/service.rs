//! Case records, the in-memory index rebuilt from the audit log, and the fairness
//! analysis run for each case.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use doping_core::fairness::{
    fairness_aware, ComponentProposal, FairnessContract, FairnessVerdict, ScoringSystem,
};
use doping_core::falsify::FalsifierConfig;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;
use tokio::sync::{OnceCell, Semaphore};

use crate::num::ExtReal;
use crate::store::{AuditEntry, EventKind, Store, StoreError};

pub const PAGE_SIZE: usize = 20;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown case {0}")]
    NotFound(String),
    #[error("{0}")]
    Validation(String),
    #[error("analysis required before a decision")]
    AnalysisRequired,
    #[error("case {0} already has a decision; only escalation may override it")]
    Conflict(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("analysis failed: {0}")]
    Analysis(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Accept,
    DeskReject,
    Escalate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Action,
    pub rationale: String,
    pub decided_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterpart {
    pub input: Vec<f64>,
    pub output: f64,
}

/// Stored form of a fairness verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub system_output: f64,
    pub score: ExtReal,
    pub normalized_score: ExtReal,
    pub assessment: String,
    pub counterpart: Counterpart,
    pub bound: ExtReal,
    pub d_out: ExtReal,
    pub seed: u64,
}

impl Verdict {
    fn from_core(v: FairnessVerdict, seed: u64) -> Self {
        let assessment = match v.normalized {
            x if x == f64::NEG_INFINITY => "maximally unfair",
            x if x < 0.0 => "unfair",
            0.0 => "edge of unfair",
            _ => "fair",
        };
        Verdict {
            system_output: v.system_output,
            score: ExtReal(v.score),
            normalized_score: ExtReal(v.normalized),
            assessment: assessment.to_string(),
            counterpart: Counterpart {
                input: v.counterpart,
                output: v.counterpart_output,
            },
            bound: ExtReal(v.bound),
            d_out: ExtReal(v.d_out),
            seed,
        }
    }

    pub fn flagged(&self) -> bool {
        self.normalized_score.0 < 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pending,
    Analyzed,
    Decided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: String,
    pub actual_input: Vec<f64>,
    pub system_output: f64,
    pub verdict: Option<Verdict>,
    pub decision: Option<Decision>,
    pub created_at: DateTime<Utc>,
}

impl CaseRecord {
    pub fn status(&self) -> Status {
        match (&self.verdict, &self.decision) {
            (_, Some(_)) => Status::Decided,
            (Some(_), None) => Status::Analyzed,
            _ => Status::Pending,
        }
    }

    pub fn flagged(&self) -> bool {
        self.verdict.as_ref().is_some_and(Verdict::flagged)
    }

    pub fn summary(&self) -> CaseSummary {
        CaseSummary {
            id: self.id.clone(),
            created_at: self.created_at,
            status: self.status(),
            system_output: self.system_output,
            normalized_score: self.verdict.as_ref().map(|v| v.normalized_score),
            flagged: self.flagged(),
            action: self.decision.as_ref().map(|d| d.action),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub status: Status,
    pub system_output: f64,
    pub normalized_score: Option<ExtReal>,
    pub flagged: bool,
    pub action: Option<Action>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
pub struct CaseFilter {
    #[serde(default)]
    pub flagged: bool,
    pub status: Option<Status>,
    #[serde(default)]
    pub page: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasePage {
    pub page: usize,
    pub page_size: usize,
    pub total: usize,
    pub cases: Vec<CaseSummary>,
}

/// Monitoring parameters shared by all cases.
pub struct ServiceConfig {
    pub system: Arc<dyn ScoringSystem>,
    pub contract: FairnessContract,
    pub beta: f64,
    pub max_iterations: usize,
    pub base_seed: u64,
    pub step_bound: f64,
    pub workers: usize,
}

impl ServiceConfig {
    pub fn new(system: Arc<dyn ScoringSystem>, contract: FairnessContract) -> Self {
        ServiceConfig {
            system,
            contract,
            beta: 50.0,
            max_iterations: 10_000,
            base_seed: 0,
            step_bound: 0.1,
            workers: 4,
        }
    }
}

/// `u64` from the first eight bytes of `SHA-256(id ‖ base seed)`.
pub fn case_seed(id: &str, base: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(id.as_bytes());
    h.update(base.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("32-byte digest"))
}

/// Runs the fairness-aware analysis for one input; blocking.
pub fn analyze_input(
    cfg: &ServiceConfig,
    input: &[f64],
    seed: u64,
) -> Result<Verdict, ServiceError> {
    let fc =
        FalsifierConfig::new(cfg.beta, cfg.max_iterations, seed).map_err(ServiceError::Analysis)?;
    let mut ps = ComponentProposal::for_system(cfg.system.as_ref(), cfg.step_bound);
    let v = fairness_aware(cfg.system.as_ref(), &cfg.contract, input, &fc, &mut ps)
        .map_err(|e| ServiceError::Analysis(e.to_string()))?;
    Ok(Verdict::from_core(v, seed))
}

#[derive(Debug)]
struct State {
    store: Store,
    cases: BTreeMap<String, CaseRecord>,
    audit: Vec<AuditEntry>,
}

fn bad_log(e: &AuditEntry, m: &str) -> StoreError {
    StoreError::Corrupt {
        path: Default::default(),
        line: e.sequence as usize,
        message: m.to_string(),
    }
}

impl State {
    /// Applies one logged event to the index. Shared by replay and live writes.
    fn apply(&mut self, e: &AuditEntry) -> Result<(), StoreError> {
        match e.event {
            EventKind::Ingested => {
                let mut case: CaseRecord = serde_json::from_value(e.payload.clone())
                    .map_err(|x| bad_log(e, &x.to_string()))?;
                case.id = e.case_id.clone();
                self.cases.insert(e.case_id.clone(), case);
            }
            EventKind::Analyzed => {
                let v: Verdict = serde_json::from_value(e.payload.clone())
                    .map_err(|x| bad_log(e, &x.to_string()))?;
                self.cases
                    .get_mut(&e.case_id)
                    .ok_or_else(|| bad_log(e, "verdict for unknown case"))?
                    .verdict = Some(v);
            }
            EventKind::Decided => {
                let d: Decision = serde_json::from_value(e.payload.clone())
                    .map_err(|x| bad_log(e, &x.to_string()))?;
                let case = self
                    .cases
                    .get_mut(&e.case_id)
                    .ok_or_else(|| bad_log(e, "decision for unknown case"))?;
                if case.verdict.is_none() {
                    return Err(bad_log(e, "decision before analysis"));
                }
                case.decision = Some(d);
            }
            EventKind::FlagRaised => {}
        }
        self.audit.push(e.clone());
        Ok(())
    }

    fn record(
        &mut self,
        actor: &str,
        event: EventKind,
        id: &str,
        payload: serde_json::Value,
    ) -> Result<(), StoreError> {
        let e = self.store.append(actor, event, id, payload, Utc::now())?;
        self.apply(&e)
    }
}

/// The oversight service: a case index over the audit log plus a bounded analysis pool.
pub struct Service {
    config: Arc<ServiceConfig>,
    state: RwLock<State>,
    running: Mutex<HashMap<String, Arc<OnceCell<Verdict>>>>,
    permits: Semaphore,
}

impl Service {
    pub fn open(config: ServiceConfig, store_path: &Path) -> Result<Self, ServiceError> {
        let (store, entries) = Store::open(store_path)?;
        let mut state = State {
            store,
            cases: BTreeMap::new(),
            audit: Vec::new(),
        };
        for e in &entries {
            state.apply(e)?;
        }
        let permits = Semaphore::new(config.workers.max(1));
        Ok(Service {
            config: Arc::new(config),
            state: RwLock::new(state),
            running: Mutex::new(HashMap::new()),
            permits,
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(|p| p.into_inner())
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, State> {
        self.state.write().unwrap_or_else(|p| p.into_inner())
    }

    pub fn ingest(&self, input: Vec<f64>, actor: &str) -> Result<CaseRecord, ServiceError> {
        let p = &self.config.system;
        p.check(&input)
            .map_err(|e| ServiceError::Validation(e.to_string()))?;
        let system_output = p
            .evaluate(&input)
            .map_err(|e| ServiceError::Validation(e.to_string()))?;
        let mut st = self.write();
        let id = format!("c-{:06}", st.cases.len() + 1);
        let case = CaseRecord {
            id: id.clone(),
            actual_input: input,
            system_output,
            verdict: None,
            decision: None,
            created_at: Utc::now(),
        };
        let payload = serde_json::to_value(&case).expect("records serialize");
        st.record(actor, EventKind::Ingested, &id, payload)?;
        Ok(case)
    }

    pub fn get(&self, id: &str) -> Result<CaseRecord, ServiceError> {
        self.read()
            .cases
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    pub fn list(&self, filter: &CaseFilter) -> CasePage {
        let st = self.read();
        let mut all: Vec<&CaseRecord> = st
            .cases
            .values()
            .filter(|c| !filter.flagged || c.flagged())
            .filter(|c| filter.status.is_none_or(|s| c.status() == s))
            .collect();
        all.sort_by(|a, b| {
            a.created_at
                .cmp(&b.created_at)
                .then_with(|| a.id.cmp(&b.id))
        });
        CasePage {
            page: filter.page,
            page_size: PAGE_SIZE,
            total: all.len(),
            cases: all
                .iter()
                .skip(filter.page.saturating_mul(PAGE_SIZE))
                .take(PAGE_SIZE)
                .map(|c| c.summary())
                .collect(),
        }
    }

    pub fn audit(&self) -> Vec<AuditEntry> {
        self.read().audit.clone()
    }

    /// Computes the verdict once per case; later and concurrent calls get the stored one.
    pub async fn analyze(&self, id: &str, actor: &str) -> Result<Verdict, ServiceError> {
        let case = self.get(id)?;
        if let Some(v) = case.verdict {
            return Ok(v);
        }
        let cell = self
            .running
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .entry(id.to_string())
            .or_default()
            .clone();
        let v = cell
            .get_or_try_init(|| async {
                // Another task may have finished between the check above and the cell.
                if let Some(v) = self.get(id)?.verdict {
                    return Ok(v);
                }
                let _permit = self
                    .permits
                    .acquire()
                    .await
                    .expect("semaphore is never closed");
                let cfg = Arc::clone(&self.config);
                let seed = case_seed(id, cfg.base_seed);
                let input = case.actual_input.clone();
                let v = tokio::task::spawn_blocking(move || analyze_input(&cfg, &input, seed))
                    .await
                    .map_err(|e| ServiceError::Analysis(e.to_string()))??;
                let mut st = self.write();
                let payload = serde_json::to_value(&v).expect("verdicts serialize");
                st.record(actor, EventKind::Analyzed, id, payload)?;
                if v.flagged() {
                    st.record(
                        actor,
                        EventKind::FlagRaised,
                        id,
                        json!({ "normalized_score": v.normalized_score }),
                    )?;
                }
                Ok::<_, ServiceError>(v)
            })
            .await?
            .clone();
        self.running
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .remove(id);
        Ok(v)
    }

    pub fn decide(
        &self,
        id: &str,
        action: Action,
        rationale: String,
        actor: &str,
    ) -> Result<CaseRecord, ServiceError> {
        if rationale.trim().is_empty() {
            return Err(ServiceError::Validation(
                "rationale must not be empty".into(),
            ));
        }
        let mut st = self.write();
        let case = st
            .cases
            .get(id)
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))?;
        if case.verdict.is_none() {
            return Err(ServiceError::AnalysisRequired);
        }
        if case.decision.is_some() && action != Action::Escalate {
            return Err(ServiceError::Conflict(id.to_string()));
        }
        let d = Decision {
            action,
            rationale,
            decided_at: Utc::now(),
        };
        st.record(
            actor,
            EventKind::Decided,
            id,
            serde_json::to_value(&d).expect("decisions serialize"),
        )?;
        Ok(st.cases[id].clone())
    }
}
