//! Cleanness and individual-fairness analysis for black-box systems.
//!
//! The crate is organised bottom-up:
//!
//! - [`traces`]: finite discrete-time traces, mixed-IO symbols, projections and distances.
//! - [`logic`]: STL and HyperSTL formulas with Boolean and quantitative evaluation.
//! - [`cleanness`]: cleanness contexts, the HyperSTL/STL cleanness formulas and brute-force oracles.
//! - [`falsify`]: Monte-Carlo Markov chain falsification and the restricted input space.
//! - [`emissions`]: NOx prediction from trip recordings and the drive-cycle falsification driver.
//! - [`fairness`]: fairness contracts, the fairness score, the fairness monitor and reference HR systems.
//! - [`contract`]: the on-disk contract document.
//!
//! Extended reals are plain `f64` values with `f64::INFINITY` as the unbounded sentinel;
//! see [`ext`] for the arithmetic conventions.

pub mod cleanness;
pub mod contract;
pub mod emissions;
pub mod ext;
pub mod fairness;
pub mod falsify;
pub mod logic;
pub mod piecewise;
pub mod traces;

pub use cleanness::{FuncContext, RobustContext};
pub use logic::{EvalResult, Formula, HyperFormula, Quantifier, Term};
pub use piecewise::PiecewiseLinear;
pub use traces::{Distance, EqConfig, Trace, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
