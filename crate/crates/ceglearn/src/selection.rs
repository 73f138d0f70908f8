//! Model selection: greedy agglomerative merging by Bayes factor, and an
//! exhaustive set-partition search for small instances.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::prior::PriorSpec;
use crate::scoring::{merge_log_bayes_factor, staging_log_score, StageData};
use crate::staging::{Hyperstage, StageBlock, Staging};
use crate::tree::EventTree;

/// One accepted merge during selection.
#[derive(Debug, Clone)]
pub struct MergeStep {
    /// Minimal situation indexes of the two merged stages, smaller first.
    pub pair: (usize, usize),
    pub log_bayes_factor: f64,
    pub cumulative_score: f64,
}

#[derive(Debug, Clone)]
pub struct SelectionTrace {
    pub initial_score: f64,
    pub steps: Vec<MergeStep>,
    pub final_score: f64,
}

struct WorkBlock {
    members: Vec<usize>,
    forbidden: bool,
    class: usize,
    data: StageData,
}

impl WorkBlock {
    fn min_member(&self) -> usize {
        self.members[0]
    }
}

/// Greedy agglomerative selection: repeatedly merges the eligible stage pair
/// with the highest log Bayes factor while that maximum is positive. Ties are
/// broken by the lexicographically smallest pair of minimal situation
/// indexes. Forbidden blocks never merge.
pub fn ahc_select(
    tree: &EventTree,
    prior: &PriorSpec,
    initial: &Staging,
    hyperstage: &Hyperstage,
) -> Result<(Staging, SelectionTrace)> {
    initial.validate_for(tree)?;
    if !hyperstage.respects(initial) {
        return Err(Error::Argument(
            "initial staging does not respect the hyperstage".into(),
        ));
    }

    let mut blocks: Vec<Option<WorkBlock>> = initial
        .blocks()
        .iter()
        .map(|b| {
            Some(WorkBlock {
                members: b.members.clone(),
                forbidden: b.forbidden,
                class: hyperstage.class_of(b.members[0]),
                data: StageData::gather(tree, prior, &b.members),
            })
        })
        .collect();

    let initial_score = staging_log_score(tree, initial, prior)?;
    let mut score = initial_score;
    let mut steps = Vec::new();

    // Cache of pairwise log Bayes factors; block slots are never reused, so
    // entries stay valid until one side is merged away.
    let mut cache: HashMap<(usize, usize), f64> = HashMap::new();
    let eligible = |a: &WorkBlock, b: &WorkBlock| !a.forbidden && !b.forbidden && a.class == b.class;

    let mut active: Vec<usize> = (0..blocks.len()).collect();
    for (idx, &i) in active.iter().enumerate() {
        for &j in &active[idx + 1..] {
            let (a, b) = (blocks[i].as_ref().unwrap(), blocks[j].as_ref().unwrap());
            if eligible(a, b) {
                cache.insert((i, j), merge_log_bayes_factor(&a.data, &b.data)?);
            }
        }
    }

    loop {
        let mut best: Option<(f64, usize, usize, (usize, usize))> = None;
        for (&(i, j), &bf) in &cache {
            if bf <= 0.0 {
                continue;
            }
            let (a, b) = (blocks[i].as_ref().unwrap(), blocks[j].as_ref().unwrap());
            let mut key = (a.min_member(), b.min_member());
            if key.0 > key.1 {
                key = (key.1, key.0);
            }
            let better = match &best {
                None => true,
                Some((best_bf, _, _, best_key)) => {
                    bf > *best_bf || (bf == *best_bf && key < *best_key)
                }
            };
            if better {
                best = Some((bf, i, j, key));
            }
        }
        let Some((bf, i, j, key)) = best else { break };

        let a = blocks[i].take().unwrap();
        let b = blocks[j].take().unwrap();
        let mut members = a.members;
        members.extend(b.members);
        members.sort_unstable();
        let merged = WorkBlock {
            data: StageData::gather(tree, prior, &members),
            members,
            forbidden: false,
            class: a.class,
        };
        let new_id = blocks.len();
        cache.retain(|&(x, y), _| x != i && x != j && y != i && y != j);
        active.retain(|&x| x != i && x != j);
        for &other in &active {
            let o = blocks[other].as_ref().unwrap();
            if eligible(o, &merged) {
                cache.insert((other, new_id), merge_log_bayes_factor(&o.data, &merged.data)?);
            }
        }
        blocks.push(Some(merged));
        active.push(new_id);

        score += bf;
        steps.push(MergeStep {
            pair: key,
            log_bayes_factor: bf,
            cumulative_score: score,
        });
    }

    let final_blocks: Vec<StageBlock> = active
        .iter()
        .map(|&i| {
            let b = blocks[i].as_ref().unwrap();
            StageBlock {
                members: b.members.clone(),
                forbidden: b.forbidden,
            }
        })
        .collect();
    let staging = Staging::from_blocks(tree, final_blocks)?;
    let trace = SelectionTrace {
        initial_score,
        steps,
        final_score: score,
    };
    Ok((staging, trace))
}

/// Enumerates every set partition within each hyperstage class (zero-sample
/// blocks held fixed) and returns the staging with the highest log score.
/// Classes larger than `max_situations_per_class` are refused.
pub fn exhaustive_select(
    tree: &EventTree,
    prior: &PriorSpec,
    hyperstage: &Hyperstage,
    max_situations_per_class: usize,
) -> Result<Staging> {
    let zero = crate::staging::initial_zero_sample_staging(tree, hyperstage);
    let mut out_blocks: Vec<StageBlock> = zero
        .blocks()
        .iter()
        .filter(|b| b.forbidden)
        .cloned()
        .collect();

    for class in hyperstage.classes() {
        if class.len() > max_situations_per_class {
            return Err(Error::Size(format!(
                "hyperstage class with {} situations exceeds the cap of {}",
                class.len(),
                max_situations_per_class
            )));
        }
        let free: Vec<usize> = class
            .iter()
            .copied()
            .filter(|&s| !zero.blocks()[zero.stage_of(s)].forbidden)
            .collect();
        if free.is_empty() {
            continue;
        }
        let best = best_partition(tree, prior, &free)?;
        out_blocks.extend(best);
    }
    Staging::from_blocks(tree, out_blocks)
}

/// Scores every partition of `free` (via restricted growth strings, in
/// lexicographic order) and keeps the first maximum.
fn best_partition(tree: &EventTree, prior: &PriorSpec, free: &[usize]) -> Result<Vec<StageBlock>> {
    let n = free.len();
    let mut assignment = vec![0usize; n];
    let mut best_score = f64::NEG_INFINITY;
    let mut best: Vec<Vec<usize>> = Vec::new();

    loop {
        let n_blocks = assignment.iter().max().unwrap() + 1;
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_blocks];
        for (i, &g) in assignment.iter().enumerate() {
            groups[g].push(free[i]);
        }
        let mut score = 0.0;
        for g in &groups {
            score += StageData::gather(tree, prior, g).log_ml()?;
        }
        if score > best_score {
            best_score = score;
            best = groups;
        }

        // next restricted growth string
        let mut i = n;
        loop {
            if i == 1 {
                return Ok(best
                    .into_iter()
                    .map(|members| StageBlock {
                        members,
                        forbidden: false,
                    })
                    .collect());
            }
            i -= 1;
            let cap = assignment[..i].iter().max().unwrap() + 1;
            if assignment[i] < cap {
                assignment[i] += 1;
                for a in assignment[i + 1..].iter_mut() {
                    *a = 0;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_dataset;
    use crate::prior::assign_mass_conserving_prior;
    use crate::staging::{default_hyperstage, initial_zero_sample_staging, HyperstagePolicy};
    use crate::tree::MissingMode;

    fn setup(csv: &str, order: &[&str], alpha_bar: f64) -> (EventTree, PriorSpec, Hyperstage, Staging) {
        let d = load_dataset(csv.as_bytes(), None).unwrap();
        let order: Vec<String> = order.iter().map(|s| s.to_string()).collect();
        let tree = EventTree::build(&d, &order, MissingMode::PrefixCount).unwrap();
        let prior = assign_mass_conserving_prior(&tree, alpha_bar).unwrap();
        let hyper = default_hyperstage(&tree, HyperstagePolicy::SameLabels);
        let initial = initial_zero_sample_staging(&tree, &hyper);
        (tree, prior, hyper, initial)
    }

    fn two_leaf_csv(counts: [[u32; 2]; 2]) -> String {
        // two root categories, binary second level with given (x,y) counts
        let mut s = String::from("V1,V2\n");
        for (ri, root) in ["a", "b"].iter().enumerate() {
            for (ci, cat) in ["x", "y"].iter().enumerate() {
                for _ in 0..counts[ri][ci] {
                    s.push_str(&format!("{root},{cat}\n"));
                }
            }
        }
        s
    }

    #[test]
    fn opposed_counts_do_not_merge() {
        // counts (1,0) and (0,1) with alpha (1,1): log BF = log 0.8 < 0
        let (tree, prior, hyper, initial) = setup(&two_leaf_csv([[1, 0], [0, 1]]), &["V1", "V2"], 4.0);
        let (staging, trace) = ahc_select(&tree, &prior, &initial, &hyper).unwrap();
        let second_level: Vec<_> = tree.situations_at(1).collect();
        assert_ne!(staging.stage_of(second_level[0]), staging.stage_of(second_level[1]));
        // root is alone in its class, so the only candidate pair was rejected
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn aligned_counts_merge() {
        let (tree, prior, hyper, initial) = setup(&two_leaf_csv([[10, 0], [9, 1]]), &["V1", "V2"], 4.0);
        let (staging, trace) = ahc_select(&tree, &prior, &initial, &hyper).unwrap();
        let second_level: Vec<_> = tree.situations_at(1).collect();
        assert_eq!(staging.stage_of(second_level[0]), staging.stage_of(second_level[1]));
        assert_eq!(trace.steps.len(), 1);
        assert!(trace.steps[0].log_bayes_factor > 0.0);
    }

    #[test]
    fn trace_is_monotone() {
        let csv = "V1,V2\na,x\na,x\na,y\nb,x\nb,x\nb,y\nc,x\nc,y\n";
        let (tree, prior, hyper, initial) = setup(csv, &["V1", "V2"], 3.0);
        let (staging, trace) = ahc_select(&tree, &prior, &initial, &hyper).unwrap();
        let mut prev = trace.initial_score;
        for step in &trace.steps {
            assert!(step.log_bayes_factor > 0.0);
            assert!(step.cumulative_score > prev);
            prev = step.cumulative_score;
        }
        assert!(trace.final_score >= trace.initial_score);
        let direct = staging_log_score(&tree, &staging, &prior).unwrap();
        assert!((direct - trace.final_score).abs() < 1e-9);
    }

    #[test]
    fn forbidden_blocks_never_merge() {
        let d = load_dataset("V1,V2\na,\nb,\nc,x\nc,y\nc,x\n".as_bytes(), None).unwrap();
        let order = vec!["V1".to_string(), "V2".to_string()];
        let tree = EventTree::build(&d, &order, MissingMode::PrefixCount).unwrap();
        let prior = assign_mass_conserving_prior(&tree, 3.0).unwrap();
        let hyper = default_hyperstage(&tree, HyperstagePolicy::SameLabels);
        let initial = initial_zero_sample_staging(&tree, &hyper);
        let forbidden_before: Vec<_> = initial.blocks().iter().filter(|b| b.forbidden).cloned().collect();
        let (staging, _) = ahc_select(&tree, &prior, &initial, &hyper).unwrap();
        let forbidden_after: Vec<_> = staging.blocks().iter().filter(|b| b.forbidden).cloned().collect();
        assert_eq!(forbidden_before, forbidden_after);
    }

    #[test]
    fn exhaustive_matches_enumeration_of_three() {
        let csv = "V1,V2\na,x\na,x\nb,x\nb,y\nc,y\nc,y\n";
        let (tree, prior, hyper, _) = setup(csv, &["V1", "V2"], 3.0);
        let best = exhaustive_select(&tree, &prior, &hyper, 8).unwrap();
        // brute force over all 5 partitions of the three depth-1 situations
        let sits: Vec<usize> = tree.situations_at(1).collect();
        let partitions: Vec<Vec<Vec<usize>>> = vec![
            vec![vec![sits[0]], vec![sits[1]], vec![sits[2]]],
            vec![vec![sits[0], sits[1]], vec![sits[2]]],
            vec![vec![sits[0], sits[2]], vec![sits[1]]],
            vec![vec![sits[0]], vec![sits[1], sits[2]]],
            vec![vec![sits[0], sits[1], sits[2]]],
        ];
        let mut best_manual = f64::NEG_INFINITY;
        for p in &partitions {
            let mut blocks = vec![StageBlock { members: vec![0], forbidden: false }];
            blocks.extend(p.iter().map(|m| StageBlock { members: m.clone(), forbidden: false }));
            let st = Staging::from_blocks(&tree, blocks).unwrap();
            let score = staging_log_score(&tree, &st, &prior).unwrap();
            best_manual = best_manual.max(score);
        }
        let got = staging_log_score(&tree, &best, &prior).unwrap();
        assert!((got - best_manual).abs() < 1e-9);
    }

    #[test]
    fn exhaustive_merges_identical_large_counts() {
        let (tree, prior, hyper, _) = setup(&two_leaf_csv([[20, 5], [20, 5]]), &["V1", "V2"], 4.0);
        let best = exhaustive_select(&tree, &prior, &hyper, 8).unwrap();
        let sits: Vec<usize> = tree.situations_at(1).collect();
        assert_eq!(best.stage_of(sits[0]), best.stage_of(sits[1]));
    }

    #[test]
    fn exhaustive_refuses_large_classes() {
        let (tree, prior, hyper, _) = setup(&two_leaf_csv([[1, 1], [1, 1]]), &["V1", "V2"], 4.0);
        let err = exhaustive_select(&tree, &prior, &hyper, 1).unwrap_err();
        assert_eq!(err.category(), "size");
    }

    #[test]
    fn exhaustive_dominates_ahc() {
        let (tree, prior, hyper, initial) = setup(&two_leaf_csv([[7, 3], [6, 4]]), &["V1", "V2"], 2.0);
        let (greedy, _) = ahc_select(&tree, &prior, &initial, &hyper).unwrap();
        let best = exhaustive_select(&tree, &prior, &hyper, 8).unwrap();
        let g = staging_log_score(&tree, &greedy, &prior).unwrap();
        let b = staging_log_score(&tree, &best, &prior).unwrap();
        assert!(b >= g - 1e-12);
    }

    #[test]
    fn determinism() {
        let csv = "V1,V2\na,x\na,y\nb,x\nb,y\nc,x\nc,x\n";
        let (tree, prior, hyper, initial) = setup(csv, &["V1", "V2"], 3.0);
        let (s1, t1) = ahc_select(&tree, &prior, &initial, &hyper).unwrap();
        let (s2, t2) = ahc_select(&tree, &prior, &initial, &hyper).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(t1.steps.len(), t2.steps.len());
        for (a, b) in t1.steps.iter().zip(&t2.steps) {
            assert_eq!(a.pair, b.pair);
            assert_eq!(a.log_bayes_factor, b.log_bayes_factor);
        }
    }
}
