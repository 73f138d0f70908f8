//! End-to-end fitting: tree construction, prior assignment, selection,
//! probability estimation and CEG collapse in one call.

use crate::ceg::{build_ceg, Ceg, StagedTree};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::prior::assign_mass_conserving_prior;
use crate::scoring::Estimator;
use crate::selection::{ahc_select, SelectionTrace};
use crate::staging::{default_hyperstage, initial_zero_sample_staging, Hyperstage, HyperstagePolicy, Staging};
use crate::tree::{EventTree, MissingMode};

#[derive(Debug, Clone, Default)]
pub struct FitConfig {
    /// Equivalent sample size; defaults to the tree's maximum out-degree.
    pub alpha_bar: Option<f64>,
    pub estimator: Estimator,
    pub policy: HyperstagePolicy,
    pub missing_mode: MissingMode,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub staged_tree: StagedTree,
    pub ceg: Ceg,
    pub trace: SelectionTrace,
}

impl FitResult {
    pub fn log_score(&self) -> f64 {
        self.trace.final_score
    }
}

/// Full staged-tree workflow: builds the event tree for `order`, starts from
/// the zero-sample staging and runs greedy selection.
pub fn fit_full(data: &Dataset, order: &[String], config: &FitConfig) -> Result<FitResult> {
    let tree = EventTree::build(data, order, config.missing_mode)?;
    let hyper = default_hyperstage(&tree, config.policy);
    let initial = initial_zero_sample_staging(&tree, &hyper);
    fit_from_initial(tree, initial, &hyper, config)
}

/// Runs selection from an explicit initial staging and assembles the result.
pub fn fit_from_initial(
    tree: EventTree,
    initial: Staging,
    hyperstage: &Hyperstage,
    config: &FitConfig,
) -> Result<FitResult> {
    let alpha_bar = config
        .alpha_bar
        .unwrap_or_else(|| tree.max_out_degree() as f64);
    let prior = assign_mass_conserving_prior(&tree, alpha_bar)?;
    let (staging, trace) = ahc_select(&tree, &prior, &initial, hyperstage)?;
    let staged_tree = StagedTree::new(tree, staging, prior)?
        .with_probabilities(config.estimator)?;
    let ceg = build_ceg(&staged_tree)?;
    Ok(FitResult {
        staged_tree,
        ceg,
        trace,
    })
}

/// P(V_depth = category | first `prefix.len()` variables equal `prefix`),
/// marginalizing over the variables in between.
pub fn conditional_probability(
    st: &StagedTree,
    prefix: &[usize],
    depth: usize,
    category: usize,
) -> Result<f64> {
    let tree = &st.tree;
    if depth >= tree.levels() || prefix.len() > depth {
        return Err(Error::Argument(format!(
            "depth {depth} incompatible with prefix of length {} (tree has {} levels)",
            prefix.len(),
            tree.levels()
        )));
    }
    if category >= tree.categories_at(depth).len() {
        return Err(Error::Argument(format!(
            "category index {category} out of range at depth {depth}"
        )));
    }
    let probs = st
        .probabilities
        .as_ref()
        .ok_or_else(|| Error::State("probabilities not estimated".into()))?;

    let start = tree.situation_at(prefix)?;
    let mut weights: Vec<(usize, f64)> = vec![(start, 1.0)];
    for _ in prefix.len()..depth {
        let mut next = Vec::new();
        for &(s, w) in &weights {
            for c in 0..tree.out_degree(s) {
                let child = tree
                    .child_situation(s, c)
                    .expect("depth < target depth, so children are situations");
                next.push((child, w * probs.probabilities(s)[c]));
            }
        }
        weights = next;
    }
    Ok(weights
        .iter()
        .map(|&(s, w)| w * probs.probabilities(s)[category])
        .sum())
}
