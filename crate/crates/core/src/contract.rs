//! On-disk contract documents (TOML).
//!
//! ```toml
//! kind = "robust"
//! epsilon = 0.001
//! kappa_in = 1.0
//! kappa_out = inf
//! std = ["w1.csv", "w2.csv"]
//!
//! [d_in]
//! kind = "mixed-in"
//!
//! [d_out]
//! kind = "mixed-out"
//! ```
//!
//! `func` and `fairness` documents carry `f = [[lo, hi, slope, intercept], ...]` instead of
//! the two thresholds. Standard trace paths are relative to the document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cleanness::{CleannessError, FuncContext, RobustContext};
use crate::fairness::FairnessContract;
use crate::piecewise::PiecewiseLinear;
use crate::traces::{Distance, EqConfig, Trace, TraceError, DEFAULT_EPSILON};

#[derive(Debug, Error)]
pub enum ContractError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing contract: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("writing contract: {0}")]
    Render(#[from] toml::ser::Error),
    #[error("contract: {0}")]
    Invalid(String),
    #[error("standard trace {path}: {source}")]
    Trace { path: PathBuf, source: TraceError },
    #[error(transparent)]
    Cleanness(#[from] CleannessError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContractKind {
    Robust,
    Func,
    Fairness,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

/// The document as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractDoc {
    pub kind: ContractKind,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_out: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<PiecewiseLinear>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub std: Vec<String>,
    pub d_in: Distance,
    pub d_out: Distance,
}

impl ContractDoc {
    pub fn parse(text: &str) -> Result<Self, ContractError> {
        let doc: ContractDoc = toml::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn render(&self) -> Result<String, ContractError> {
        Ok(toml::to_string(self)?)
    }

    fn validate(&self) -> Result<(), ContractError> {
        let bad = |m: &str| Err(ContractError::Invalid(m.to_string()));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be a positive real");
        }
        self.d_in.validate().map_err(ContractError::Invalid)?;
        self.d_out.validate().map_err(ContractError::Invalid)?;
        match self.kind {
            ContractKind::Robust => {
                if self.kappa_in.is_none() || self.kappa_out.is_none() {
                    return bad("robust contracts need kappa_in and kappa_out");
                }
                if self.f.is_some() {
                    return bad("robust contracts take no f");
                }
                if self.std.is_empty() {
                    return bad("robust contracts need at least one std trace");
                }
            }
            ContractKind::Func | ContractKind::Fairness => {
                if self.f.is_none() {
                    return bad("func and fairness contracts need f");
                }
                if self.kappa_in.is_some() || self.kappa_out.is_some() {
                    return bad("func and fairness contracts take no kappa values");
                }
                if self.kind == ContractKind::Func && self.std.is_empty() {
                    return bad("func contracts need at least one std trace");
                }
                if self.kind == ContractKind::Fairness && !self.std.is_empty() {
                    return bad("fairness contracts carry no standard behaviour");
                }
            }
        }
        Ok(())
    }
}

/// A parsed document together with the directory its trace paths are relative to.
#[derive(Debug, Clone, PartialEq)]
pub struct Contract {
    pub doc: ContractDoc,
    pub base_dir: PathBuf,
}

impl Contract {
    pub fn load(path: &Path) -> Result<Self, ContractError> {
        let text = std::fs::read_to_string(path).map_err(|source| ContractError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Contract {
            doc: ContractDoc::parse(&text)?,
            base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ContractError> {
        std::fs::write(path, self.doc.render()?).map_err(|source| ContractError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn kind(&self) -> ContractKind {
        self.doc.kind
    }

    pub fn std_traces(&self) -> Result<Vec<Trace>, ContractError> {
        self.doc
            .std
            .iter()
            .map(|p| {
                let path = self.base_dir.join(p);
                Trace::load_csv(&path).map_err(|source| ContractError::Trace { path, source })
            })
            .collect()
    }

    fn eq(&self) -> EqConfig {
        EqConfig {
            base: self.doc.d_in.clone(),
            epsilon: self.doc.epsilon,
        }
    }

    pub fn robust_context(&self) -> Result<RobustContext, ContractError> {
        let (Some(ki), Some(ko)) = (self.doc.kappa_in, self.doc.kappa_out) else {
            return Err(ContractError::Invalid("not a robust contract".into()));
        };
        Ok(RobustContext::new(
            self.std_traces()?,
            self.doc.d_in.clone(),
            self.doc.d_out.clone(),
            ki,
            ko,
            self.eq(),
        )?)
    }

    pub fn func_context(&self) -> Result<FuncContext, ContractError> {
        let (ContractKind::Func, Some(f)) = (self.doc.kind, &self.doc.f) else {
            return Err(ContractError::Invalid("not a func contract".into()));
        };
        Ok(FuncContext::new(
            self.std_traces()?,
            self.doc.d_in.clone(),
            self.doc.d_out.clone(),
            f.clone(),
            self.eq(),
        )?)
    }

    pub fn fairness_contract(&self) -> Result<FairnessContract, ContractError> {
        let (ContractKind::Fairness, Some(f)) = (self.doc.kind, &self.doc.f) else {
            return Err(ContractError::Invalid("not a fairness contract".into()));
        };
        Ok(FairnessContract {
            d_in: self.doc.d_in.clone(),
            d_out: self.doc.d_out.clone(),
            f: f.clone(),
        })
    }
}
