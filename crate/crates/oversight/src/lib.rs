//! Oversight of fairness-monitored decisions: cases are ingested, analysed by the
//! fairness-aware wrapper and decided by a reviewer, with every step in an append-only
//! audit log.

pub mod http;
pub mod num;
pub mod service;
pub mod store;

pub use http::{router, serve};
pub use service::{Action, CaseFilter, CaseRecord, Service, ServiceConfig, ServiceError, Verdict};
pub use store::{AuditEntry, EventKind};
