//! Random forests with explicit inbag/out-of-bag bookkeeping.
//!
//! Every fitted tree keeps its bootstrap record and two sets of node
//! statistics: one filled from the inbag sample (which also chose the
//! splits) and one filled by routing the out-of-bag rows after growth.
//! On top of that the crate provides:
//!
//! * [`importance`]: MDI, the penalized Gini family (optionally with the
//!   `N/(N-1)` variance correction), MDI-oob and OOB permutation importance.
//! * [`explain`]: conditional feature contributions (Saabas values),
//!   path-dependent TreeSHAP with an inbag or OOB cover, a brute-force
//!   Shapley oracle, label-weighted SHAP and the MDI/CFC bridge.
//! * [`experiments`]: data generators and the simulation studies used to
//!   compare the scorers (null/power, noisy-feature AUC, Titanic, null-split
//!   bias).

pub mod data;
pub mod error;
pub mod explain;
pub mod experiments;
pub mod forest;
pub mod importance;
pub mod split;

pub use data::{load_csv, load_titanic, read_header, Arity, Dataset, LoadSummary};
pub use error::{Error, Result};
pub use forest::{Forest, ForestParams, Node, NodeStats, Sampling, SplitRecord, Tree};
pub use importance::{ImportanceReport, PgConfig};
