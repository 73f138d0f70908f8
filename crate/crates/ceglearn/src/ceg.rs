//! Staged trees and their collapse into chain event graphs.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::prior::PriorSpec;
use crate::scoring::{estimate_probabilities, staging_log_score, EdgeProbabilities, Estimator};
use crate::staging::Staging;
use crate::tree::EventTree;

/// An event tree together with a staging and its prior; probabilities are
/// attached after estimation.
#[derive(Debug, Clone)]
pub struct StagedTree {
    pub tree: EventTree,
    pub staging: Staging,
    pub prior: PriorSpec,
    pub probabilities: Option<EdgeProbabilities>,
}

impl StagedTree {
    pub fn new(tree: EventTree, staging: Staging, prior: PriorSpec) -> Result<Self> {
        staging.validate_for(&tree)?;
        Ok(StagedTree {
            tree,
            staging,
            prior,
            probabilities: None,
        })
    }

    pub fn with_probabilities(mut self, estimator: Estimator) -> Result<Self> {
        self.probabilities = Some(estimate_probabilities(
            &self.tree,
            &self.staging,
            &self.prior,
            estimator,
        )?);
        Ok(self)
    }

    pub fn log_score(&self) -> Result<f64> {
        staging_log_score(&self.tree, &self.staging, &self.prior)
    }

    /// True when the situation belongs to a forbidden (zero-sample) stage or
    /// has no observations reaching it.
    pub fn zero_sample(&self, situation: usize) -> bool {
        self.staging.blocks()[self.staging.stage_of(situation)].forbidden
            || self.tree.incoming_count(situation) == 0
    }
}

/// Assigns each situation a position: situations coalesce when they share a
/// stage and their corresponding children lie in the same positions (computed
/// bottom-up; all leaves coalesce into the sink). Position ids are assigned by
/// first occurrence in situation-index order, so they are deterministic.
pub fn compute_positions(tree: &EventTree, staging: &Staging) -> Vec<usize> {
    // representative (minimal situation index) of each position, bottom-up
    let mut rep = vec![usize::MAX; tree.n_situations()];
    for depth in (0..tree.levels()).rev() {
        let mut seen: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
        for s in tree.situations_at(depth) {
            let children: Vec<usize> = (0..tree.out_degree(s))
                .map(|c| match tree.child_situation(s, c) {
                    Some(ch) => rep[ch],
                    None => usize::MAX, // sink
                })
                .collect();
            let key = (staging.stage_of(s), children);
            rep[s] = *seen.entry(key).or_insert(s);
        }
    }
    let mut id_of_rep: BTreeMap<usize, usize> = BTreeMap::new();
    let mut positions = vec![0usize; tree.n_situations()];
    for s in 0..tree.n_situations() {
        let next = id_of_rep.len();
        positions[s] = *id_of_rep.entry(rep[s]).or_insert(next);
    }
    positions
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CegNode {
    pub id: usize,
    /// Stage of the member situations; `None` for the sink.
    pub stage: Option<usize>,
    pub situations: Vec<usize>,
    pub zero_sample: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CegEdge {
    pub from: usize,
    pub to: usize,
    pub label: String,
    /// Observed count pooled over the source position's situations.
    pub count: u64,
    pub probability: Option<f64>,
    pub zero_sample: bool,
}

/// A chain event graph: positions plus a single sink absorbing every leaf.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Ceg {
    pub nodes: Vec<CegNode>,
    pub edges: Vec<CegEdge>,
    pub sink: usize,
}

pub fn build_ceg(staged: &StagedTree) -> Result<Ceg> {
    let probs = staged
        .probabilities
        .as_ref()
        .ok_or_else(|| crate::error::Error::State("probabilities not estimated".into()))?;
    let tree = &staged.tree;
    let positions = compute_positions(tree, &staged.staging);

    // Final grouping: one vertex per position, except that forbidden
    // (zero-sample) blocks collapse into a single vertex per stage and depth
    // to keep the graph readable. Ids follow first occurrence in situation
    // order.
    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    enum Key {
        Position(usize),
        Zero(usize, usize),
    }
    let mut id_of: BTreeMap<Key, usize> = BTreeMap::new();
    let mut node_of = vec![0usize; tree.n_situations()];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for s in 0..tree.n_situations() {
        let stage = staged.staging.stage_of(s);
        let key = if staged.staging.blocks()[stage].forbidden {
            Key::Zero(stage, tree.depth_of(s))
        } else {
            Key::Position(positions[s])
        };
        let next = members.len();
        let id = *id_of.entry(key).or_insert(next);
        if id == next {
            members.push(Vec::new());
        }
        node_of[s] = id;
        members[id].push(s);
    }
    let sink = members.len();

    let mut nodes: Vec<CegNode> = members
        .iter()
        .enumerate()
        .map(|(id, ms)| CegNode {
            id,
            stage: Some(staged.staging.stage_of(ms[0])),
            situations: ms.clone(),
            zero_sample: ms.iter().all(|&s| staged.zero_sample(s)),
        })
        .collect();
    nodes.push(CegNode {
        id: sink,
        stage: None,
        situations: Vec::new(),
        zero_sample: false,
    });

    let mut edges = Vec::new();
    for (id, ms) in members.iter().enumerate() {
        let s0 = ms[0];
        let depth = tree.depth_of(s0);
        // deduplicate per (category, target); members of a vertex agree on
        // targets by construction, so this is one edge per category
        let mut targets: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for &s in ms {
            for c in 0..tree.out_degree(s) {
                let to = match tree.child_situation(s, c) {
                    Some(ch) => node_of[ch],
                    None => sink,
                };
                *targets.entry((c, to)).or_insert(0) += tree.counts(s)[c];
            }
        }
        for ((c, to), count) in targets {
            edges.push(CegEdge {
                from: id,
                to,
                label: tree.categories_at(depth)[c].clone(),
                count,
                probability: Some(probs.probabilities(s0)[c]),
                zero_sample: count == 0 || nodes[id].zero_sample,
            });
        }
    }

    Ok(Ceg { nodes, edges, sink })
}

impl Ceg {
    pub fn n_positions(&self) -> usize {
        self.nodes.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_dataset;
    use crate::prior::assign_mass_conserving_prior;
    use crate::staging::{StageBlock, Staging};
    use crate::tree::MissingMode;

    fn fixture(csv: &str, order: &[&str]) -> (EventTree, PriorSpec) {
        let d = load_dataset(csv.as_bytes(), None).unwrap();
        let order: Vec<String> = order.iter().map(|s| s.to_string()).collect();
        let tree = EventTree::build(&d, &order, MissingMode::PrefixCount).unwrap();
        let prior = assign_mass_conserving_prior(&tree, 2.0).unwrap();
        (tree, prior)
    }

    #[test]
    fn singleton_staging_no_internal_coalescence() {
        let (tree, _) = fixture("V1,V2\nA,x\nB,y\n", &["V1", "V2"]);
        let staging = Staging::singletons(&tree);
        let positions = compute_positions(&tree, &staging);
        // all situations distinct positions
        let mut sorted = positions.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), tree.n_situations());
    }

    #[test]
    fn last_level_coalesces_by_stage() {
        let (tree, _) = fixture("V1,V2\nA,x\nB,y\n", &["V1", "V2"]);
        let staging = Staging::from_blocks(
            &tree,
            vec![
                StageBlock { members: vec![0], forbidden: false },
                StageBlock { members: vec![1, 2], forbidden: false },
            ],
        )
        .unwrap();
        let positions = compute_positions(&tree, &staging);
        assert_eq!(positions[1], positions[2]);
    }

    #[test]
    fn same_stage_different_children_stay_apart() {
        // three levels; stage the two depth-1 situations together but give
        // their children different stages, so they cannot share a position
        let (tree, _) = fixture("V1,V2,V3\nA,x,p\nB,y,q\n", &["V1", "V2", "V3"]);
        let d1: Vec<usize> = tree.situations_at(1).collect();
        let d2: Vec<usize> = tree.situations_at(2).collect();
        let mut blocks = vec![
            StageBlock { members: vec![0], forbidden: false },
            StageBlock { members: d1.clone(), forbidden: false },
        ];
        for &s in &d2 {
            blocks.push(StageBlock { members: vec![s], forbidden: false });
        }
        let staging = Staging::from_blocks(&tree, blocks).unwrap();
        let positions = compute_positions(&tree, &staging);
        assert_ne!(positions[d1[0]], positions[d1[1]]);
    }

    #[test]
    fn ceg_has_single_sink_and_pooled_counts() {
        let (tree, prior) = fixture("V1,V2\nA,x\nA,x\nB,x\nB,y\n", &["V1", "V2"]);
        let d1: Vec<usize> = tree.situations_at(1).collect();
        let staging = Staging::from_blocks(
            &tree,
            vec![
                StageBlock { members: vec![0], forbidden: false },
                StageBlock { members: d1.clone(), forbidden: false },
            ],
        )
        .unwrap();
        let staged = StagedTree::new(tree, staging, prior)
            .unwrap()
            .with_probabilities(Estimator::PosteriorMean)
            .unwrap();
        let ceg = build_ceg(&staged).unwrap();
        assert_eq!(ceg.n_positions(), 2); // root + merged week position
        // merged position pools counts: x = 2+1, y = 0+1
        let merged_edges: Vec<_> = ceg.edges.iter().filter(|e| e.to == ceg.sink).collect();
        assert_eq!(merged_edges.len(), 2);
        assert_eq!(merged_edges.iter().map(|e| e.count).sum::<u64>(), 4);
        for e in &ceg.edges {
            assert!(e.probability.unwrap() > 0.0);
        }
    }

    #[test]
    fn path_probabilities_preserved() {
        let (tree, prior) = fixture("V1,V2\nA,x\nA,y\nB,x\nB,y\nA,x\n", &["V1", "V2"]);
        let d1: Vec<usize> = tree.situations_at(1).collect();
        let staging = Staging::from_blocks(
            &tree,
            vec![
                StageBlock { members: vec![0], forbidden: false },
                StageBlock { members: d1.clone(), forbidden: false },
            ],
        )
        .unwrap();
        let staged = StagedTree::new(tree, staging, prior)
            .unwrap()
            .with_probabilities(Estimator::PosteriorMean)
            .unwrap();
        let ceg = build_ceg(&staged).unwrap();
        let positions = compute_positions(&staged.tree, &staged.staging);
        // for every root-to-leaf path, the product of edge probabilities in
        // the tree equals the product along the corresponding CEG walk
        let probs = staged.probabilities.as_ref().unwrap();
        for a in 0..2usize {
            for b in 0..2usize {
                let s1 = staged.tree.situation_at(&[a]).unwrap();
                let tree_p = probs.probabilities(0)[a] * probs.probabilities(s1)[b];
                let e1 = ceg
                    .edges
                    .iter()
                    .find(|e| e.from == positions[0] && e.label == staged.tree.categories_at(0)[a])
                    .unwrap();
                let e2 = ceg
                    .edges
                    .iter()
                    .find(|e| e.from == e1.to && e.label == staged.tree.categories_at(1)[b])
                    .unwrap();
                let ceg_p = e1.probability.unwrap() * e2.probability.unwrap();
                assert!((tree_p - ceg_p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ceg_requires_probabilities() {
        let (tree, prior) = fixture("V1,V2\nA,x\nB,y\n", &["V1", "V2"]);
        let staging = Staging::singletons(&tree);
        let staged = StagedTree::new(tree, staging, prior).unwrap();
        assert_eq!(build_ceg(&staged).unwrap_err().category(), "state");
    }

    #[test]
    fn zero_sample_positions_flagged() {
        let schema = vec![
            crate::data::VariableSchema::new("V1", vec!["a".into(), "b".into(), "c".into()]),
            crate::data::VariableSchema::new("V2", vec!["x".into(), "y".into()]),
        ];
        let d = load_dataset("V1,V2\nc,x\nc,y\n".as_bytes(), Some(&schema)).unwrap();
        let order = vec!["V1".to_string(), "V2".to_string()];
        let tree = EventTree::build(&d, &order, MissingMode::PrefixCount).unwrap();
        let prior = assign_mass_conserving_prior(&tree, 3.0).unwrap();
        let hyper = crate::staging::default_hyperstage(&tree, crate::staging::HyperstagePolicy::SameLabels);
        let staging = crate::staging::initial_zero_sample_staging(&tree, &hyper);
        let staged = StagedTree::new(tree, staging, prior)
            .unwrap()
            .with_probabilities(Estimator::PosteriorMean)
            .unwrap();
        let ceg = build_ceg(&staged).unwrap();
        let zero_nodes: Vec<_> = ceg.nodes.iter().filter(|n| n.zero_sample).collect();
        // the two zero-sample situations collapse into one vertex
        assert_eq!(zero_nodes.len(), 1);
        assert_eq!(zero_nodes[0].situations.len(), 2);
        for e in &ceg.edges {
            if ceg.nodes[e.from].zero_sample {
                assert!(e.zero_sample);
            }
            if e.count == 0 {
                assert!(e.zero_sample);
            }
        }
        // probabilities out of every non-sink vertex sum to 1
        for n in &ceg.nodes {
            if n.id == ceg.sink {
                continue;
            }
            let sum: f64 = ceg
                .edges
                .iter()
                .filter(|e| e.from == n.id)
                .map(|e| e.probability.unwrap())
                .sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
