//! Staged tree and chain event graph modelling for discrete longitudinal data.
//!
//! The crate builds event trees from categorical datasets, selects stagings by
//! greedy Bayes-factor maximisation under Dirichlet-multinomial scoring,
//! collapses staged trees into chain event graphs and exports them as DOT or
//! JSON. Longitudinal workflows cover full orderings, Markov assumptions
//! encoded by a DAG and sequences of marginal staged trees.

pub mod ceg;
pub mod data;
pub mod error;
pub mod export;
pub mod longitudinal;
pub mod prior;
pub mod scoring;
pub mod selection;
pub mod staging;
pub mod tree;
pub mod workflow;

pub use ceg::{build_ceg, compute_positions, Ceg, StagedTree};
pub use data::{Dataset, MarginSpec, VariableRole, VariableSchema};
pub use error::{Error, Result};
pub use longitudinal::{DagAssumptions, StagingDiff, TemplateKind};
pub use prior::PriorSpec;
pub use scoring::{EdgeProbabilities, Estimator, StageData};
pub use selection::{SelectionTrace};
pub use staging::{Hyperstage, HyperstagePolicy, Staging};
pub use tree::{EventTree, MissingMode};
pub use workflow::{FitConfig, FitResult};
