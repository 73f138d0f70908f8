//! Event trees over an ordered list of categorical variables, with observed
//! edge counts.

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Largest number of situations an event tree may hold.
const MAX_SITUATIONS: usize = 1 << 22;

/// How rows with missing values contribute to edge counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingMode {
    /// A row contributes along its path up to (exclusive) the first missing
    /// value in the chosen order.
    #[default]
    PrefixCount,
    /// Rows with any missing value among the ordered variables are dropped.
    CompleteCase,
}

/// A rooted tree whose depths are bound to variables and whose vertices at
/// depth d enumerate all category combinations of the first d variables.
/// Situations (non-leaf vertices) are indexed breadth-first, root = 0.
#[derive(Debug, Clone)]
pub struct EventTree {
    variables: Vec<String>,
    categories: Vec<Vec<String>>,
    offsets: Vec<usize>,
    counts: Vec<Vec<u64>>,
}

impl EventTree {
    /// Builds the full product-shaped tree for `order` and accumulates one
    /// count per row along its path.
    pub fn build(data: &Dataset, order: &[String], mode: MissingMode) -> Result<Self> {
        if order.is_empty() {
            return Err(Error::Argument("empty variable order".into()));
        }
        let cols: Vec<usize> = order
            .iter()
            .map(|name| data.variable_index(name))
            .collect::<Result<_>>()?;
        let categories: Vec<Vec<String>> = cols
            .iter()
            .map(|&c| data.schema()[c].categories.clone())
            .collect();
        if categories[0].len() < 2 {
            return Err(Error::Validation(format!(
                "root variable '{}' needs at least 2 categories",
                order[0]
            )));
        }

        let mut offsets = vec![0usize];
        let mut width = 1usize;
        for cats in &categories {
            let next = offsets.last().unwrap() + width;
            offsets.push(next);
            width = width
                .checked_mul(cats.len())
                .filter(|w| next.saturating_add(*w) <= MAX_SITUATIONS)
                .ok_or_else(|| Error::Size("event tree exceeds the situation limit".into()))?;
        }

        let n_situations = *offsets.last().unwrap();
        let mut tree = EventTree {
            variables: order.to_vec(),
            categories,
            offsets,
            counts: Vec::new(),
        };
        tree.counts = (0..n_situations)
            .map(|s| vec![0; tree.categories[tree.depth_of(s)].len()])
            .collect();

        for row in data.rows() {
            let values: Vec<Option<usize>> = cols.iter().map(|&c| row[c]).collect();
            if mode == MissingMode::CompleteCase && values.iter().any(|v| v.is_none()) {
                continue;
            }
            let mut situation = 0usize;
            for (depth, value) in values.iter().enumerate() {
                let Some(c) = value else { break };
                tree.counts[situation][*c] += 1;
                match tree.child_situation(situation, *c) {
                    Some(next) => situation = next,
                    None => break,
                }
                let _ = depth;
            }
        }
        Ok(tree)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn levels(&self) -> usize {
        self.variables.len()
    }

    pub fn n_situations(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn n_leaves(&self) -> usize {
        let last = self.levels() - 1;
        (self.offsets[last + 1] - self.offsets[last]) * self.categories[last].len()
    }

    pub fn depth_of(&self, situation: usize) -> usize {
        debug_assert!(situation < self.n_situations());
        self.offsets.partition_point(|&o| o <= situation) - 1
    }

    pub fn categories_at(&self, depth: usize) -> &[String] {
        &self.categories[depth]
    }

    pub fn variable_at(&self, depth: usize) -> &str {
        &self.variables[depth]
    }

    pub fn situations_at(&self, depth: usize) -> std::ops::Range<usize> {
        self.offsets[depth]..self.offsets[depth + 1]
    }

    pub fn out_degree(&self, situation: usize) -> usize {
        self.categories[self.depth_of(situation)].len()
    }

    pub fn max_out_degree(&self) -> usize {
        self.categories.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Child situation along category `c`, or `None` when the child is a leaf.
    pub fn child_situation(&self, situation: usize, c: usize) -> Option<usize> {
        let depth = self.depth_of(situation);
        if depth + 1 == self.levels() {
            return None;
        }
        let local = situation - self.offsets[depth];
        Some(self.offsets[depth + 1] + local * self.categories[depth].len() + c)
    }

    /// Leaf index (0-based among leaves) for an edge out of the last level.
    pub fn leaf_index(&self, situation: usize, c: usize) -> Option<usize> {
        let depth = self.depth_of(situation);
        if depth + 1 != self.levels() {
            return None;
        }
        let local = situation - self.offsets[depth];
        Some(local * self.categories[depth].len() + c)
    }

    pub fn parent(&self, situation: usize) -> Option<(usize, usize)> {
        if situation == 0 {
            return None;
        }
        let depth = self.depth_of(situation);
        let local = situation - self.offsets[depth];
        let k = self.categories[depth - 1].len();
        Some((self.offsets[depth - 1] + local / k, local % k))
    }

    /// Category indexes along the root path of `situation`.
    pub fn path_of(&self, situation: usize) -> Vec<usize> {
        let mut path = Vec::new();
        let mut s = situation;
        while let Some((p, c)) = self.parent(s) {
            path.push(c);
            s = p;
        }
        path.reverse();
        path
    }

    /// Situation index reached by following `path` from the root.
    pub fn situation_at(&self, path: &[usize]) -> Result<usize> {
        let mut s = 0usize;
        for (depth, &c) in path.iter().enumerate() {
            if c >= self.categories[depth].len() {
                return Err(Error::Argument(format!(
                    "category index {c} out of range at depth {depth}"
                )));
            }
            s = self
                .child_situation(s, c)
                .ok_or_else(|| Error::Argument("path descends past the last level".into()))?;
        }
        Ok(s)
    }

    pub fn counts(&self, situation: usize) -> &[u64] {
        &self.counts[situation]
    }

    pub fn out_count_sum(&self, situation: usize) -> u64 {
        self.counts[situation].iter().sum()
    }

    /// Count on the incoming edge; for the root, the total of root-outgoing
    /// counts.
    pub fn incoming_count(&self, situation: usize) -> u64 {
        match self.parent(situation) {
            Some((p, c)) => self.counts[p][c],
            None => self.out_count_sum(0),
        }
    }

    /// True when two trees have identical shape and edge labels.
    pub fn same_topology(&self, other: &EventTree) -> bool {
        self.categories == other.categories
    }
}
