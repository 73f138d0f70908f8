//! Stagings (partitions of situations into stages) and hyperstage
//! merge-eligibility constraints.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tree::EventTree;

/// One stage: a set of situations assumed to share the conditional
/// distribution over their next event. Forbidden blocks collect zero-sample
/// situations and are never merged with anything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageBlock {
    pub members: Vec<usize>,
    pub forbidden: bool,
}

/// A partition of all situations of an event tree into stages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Staging {
    blocks: Vec<StageBlock>,
    stage_of: Vec<usize>,
}

impl Staging {
    /// Every situation in its own stage.
    pub fn singletons(tree: &EventTree) -> Self {
        let blocks = (0..tree.n_situations())
            .map(|s| StageBlock {
                members: vec![s],
                forbidden: false,
            })
            .collect();
        let stage_of = (0..tree.n_situations()).collect();
        Staging { blocks, stage_of }
    }

    /// Builds a staging from explicit blocks, validating that the blocks are
    /// disjoint, cover all situations and only group situations with
    /// identical outgoing label sequences.
    pub fn from_blocks(tree: &EventTree, mut blocks: Vec<StageBlock>) -> Result<Self> {
        for b in blocks.iter_mut() {
            b.members.sort_unstable();
        }
        blocks.sort_by_key(|b| b.members.first().copied().unwrap_or(usize::MAX));
        let mut stage_of = vec![usize::MAX; tree.n_situations()];
        for (i, b) in blocks.iter().enumerate() {
            if b.members.is_empty() {
                return Err(Error::Argument("empty stage block".into()));
            }
            let labels = tree.categories_at(tree.depth_of(b.members[0]));
            for &s in &b.members {
                if s >= tree.n_situations() {
                    return Err(Error::Argument(format!("situation {s} out of range")));
                }
                if stage_of[s] != usize::MAX {
                    return Err(Error::Argument(format!("situation {s} in two blocks")));
                }
                if tree.categories_at(tree.depth_of(s)) != labels {
                    return Err(Error::Argument(format!(
                        "situation {s} has different edge labels from its stage"
                    )));
                }
                stage_of[s] = i;
            }
        }
        if stage_of.iter().any(|&x| x == usize::MAX) {
            return Err(Error::Argument("blocks do not cover all situations".into()));
        }
        Ok(Staging { blocks, stage_of })
    }

    pub fn blocks(&self) -> &[StageBlock] {
        &self.blocks
    }

    pub fn n_stages(&self) -> usize {
        self.blocks.len()
    }

    pub fn stage_of(&self, situation: usize) -> usize {
        self.stage_of[situation]
    }

    pub fn n_situations(&self) -> usize {
        self.stage_of.len()
    }

    /// Checks membership bookkeeping against a tree.
    pub fn validate_for(&self, tree: &EventTree) -> Result<()> {
        if self.stage_of.len() != tree.n_situations() {
            return Err(Error::Argument(format!(
                "staging covers {} situations, tree has {}",
                self.stage_of.len(),
                tree.n_situations()
            )));
        }
        Ok(())
    }

    /// Returns a new staging with blocks `i` and `j` merged, in canonical
    /// order (blocks sorted by minimal member).
    pub fn merged(&self, i: usize, j: usize) -> Staging {
        let mut blocks = Vec::with_capacity(self.blocks.len() - 1);
        let mut fused = self.blocks[i].members.clone();
        fused.extend_from_slice(&self.blocks[j].members);
        fused.sort_unstable();
        for (k, b) in self.blocks.iter().enumerate() {
            if k != i && k != j {
                blocks.push(b.clone());
            }
        }
        blocks.push(StageBlock {
            members: fused,
            forbidden: false,
        });
        blocks.sort_by_key(|b| b.members[0]);
        let mut stage_of = vec![0; self.stage_of.len()];
        for (k, b) in blocks.iter().enumerate() {
            for &s in &b.members {
                stage_of[s] = k;
            }
        }
        Staging { blocks, stage_of }
    }
}

/// Merge-eligibility policy for the default hyperstage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HyperstagePolicy {
    /// Situations with identical outgoing label sequences may be staged
    /// together, across depths.
    #[default]
    SameLabels,
    /// Additionally requires situations to sit at the same depth.
    SameVariable,
}

/// A partition of situations into merge-eligibility classes; every stage of a
/// produced staging must lie within one class.
#[derive(Debug, Clone)]
pub struct Hyperstage {
    classes: Vec<Vec<usize>>,
    class_of: Vec<usize>,
}

impl Hyperstage {
    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn class_of(&self, situation: usize) -> usize {
        self.class_of[situation]
    }

    /// True when every block of `staging` lies inside one class.
    pub fn respects(&self, staging: &Staging) -> bool {
        staging.blocks().iter().all(|b| {
            let c = self.class_of[b.members[0]];
            b.members.iter().all(|&s| self.class_of[s] == c)
        })
    }
}

pub fn default_hyperstage(tree: &EventTree, policy: HyperstagePolicy) -> Hyperstage {
    let mut groups: BTreeMap<(usize, Vec<String>), Vec<usize>> = BTreeMap::new();
    for depth in 0..tree.levels() {
        let labels = tree.categories_at(depth).to_vec();
        let key = match policy {
            HyperstagePolicy::SameLabels => (0, labels),
            HyperstagePolicy::SameVariable => (depth + 1, labels),
        };
        groups.entry(key).or_default().extend(tree.situations_at(depth));
    }
    let mut classes: Vec<Vec<usize>> = groups.into_values().collect();
    classes.sort_by_key(|c| c[0]);
    let mut class_of = vec![0; tree.n_situations()];
    for (i, c) in classes.iter().enumerate() {
        for &s in c {
            class_of[s] = i;
        }
    }
    Hyperstage { classes, class_of }
}

/// Within each hyperstage class, situations with no observations form one
/// forbidden block; all other situations start as singletons.
pub fn initial_zero_sample_staging(tree: &EventTree, hyperstage: &Hyperstage) -> Staging {
    let mut blocks = Vec::new();
    for class in hyperstage.classes() {
        let (zero, observed): (Vec<usize>, Vec<usize>) = class
            .iter()
            .partition(|&&s| tree.incoming_count(s) == 0);
        if !zero.is_empty() {
            blocks.push(StageBlock {
                members: zero,
                forbidden: true,
            });
        }
        for s in observed {
            blocks.push(StageBlock {
                members: vec![s],
                forbidden: false,
            });
        }
    }
    Staging::from_blocks(tree, blocks).expect("zero-sample staging is a valid partition")
}
