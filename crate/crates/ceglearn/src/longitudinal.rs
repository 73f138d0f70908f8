//! Longitudinal workflows: DAG-encoded Markov assumptions with template
//! generators, marginal staged-tree sequences and staging comparison.

use std::collections::{BTreeMap, BTreeSet};

use crate::ceg::StagedTree;
use crate::data::{project_margin, Dataset, MarginSpec};
use crate::error::{Error, Result};
use crate::staging::{default_hyperstage, StageBlock, Staging};
use crate::tree::EventTree;
use crate::workflow::{fit_from_initial, fit_full, FitConfig, FitResult};

/// Named Markov-assumption templates over (X₁,Y₁,…,X_T,Y_T).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateKind {
    /// Complete DAG in temporal order.
    Full,
    /// Drops X_s→Y_t for s < t: outcomes depend only on the current covariate
    /// among the X's.
    TimeDependence,
    /// Keeps X_{t−1}→Y_t as the only covariate parent of each outcome.
    TimeLag,
    /// Drops every Y→X edge: covariates are exogenous.
    Exogenous,
    /// Keeps only X_{t−1}→X_t among covariate-covariate edges.
    MarkovCovariates,
    /// Keeps only Y_{t−1}→Y_t among outcome-outcome edges.
    MarkovOutcome,
    /// Time dependence + exogenous covariates + Markov covariates and
    /// outcome: edges X_t→Y_t, X_t→X_{t+1}, Y_t→Y_{t+1}.
    Combined,
}

impl TemplateKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "full" => Self::Full,
            "time-dependence" => Self::TimeDependence,
            "time-lag" => Self::TimeLag,
            "exogenous" => Self::Exogenous,
            "markov-covariates" => Self::MarkovCovariates,
            "markov-outcome" => Self::MarkovOutcome,
            "combined" => Self::Combined,
            _ => {
                return Err(Error::Argument(format!(
                    "unknown template '{s}' (expected full|time-dependence|time-lag|exogenous|markov-covariates|markov-outcome|combined)"
                )))
            }
        })
    }
}

/// Markov assumptions of a DAG whose vertices are dataset variables listed in
/// temporal order; every edge points forward in that order, so acyclicity is
/// structural.
#[derive(Debug, Clone)]
pub struct DagAssumptions {
    variables: Vec<String>,
    /// Edges as (parent, child) index pairs with parent < child.
    edges: Vec<(usize, usize)>,
}

impl DagAssumptions {
    pub fn new(variables: Vec<String>, named_edges: &[(String, String)]) -> Result<Self> {
        let index = |name: &str| -> Result<usize> {
            variables
                .iter()
                .position(|v| v == name)
                .ok_or_else(|| Error::Argument(format!("unknown DAG vertex '{name}'")))
        };
        let mut edges = Vec::new();
        for (u, v) in named_edges {
            let (ui, vi) = (index(u)?, index(v)?);
            if ui >= vi {
                return Err(Error::Argument(format!(
                    "edge {u} -> {v} points against the variable order"
                )));
            }
            edges.push((ui, vi));
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(DagAssumptions { variables, edges })
    }

    /// Parses a plain-text edge list, one `parent -> child` per line; blank
    /// lines and `#` comments are skipped. Vertices are the given variables.
    pub fn from_edge_list(variables: Vec<String>, text: &str) -> Result<Self> {
        let mut named = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split("->");
            let (u, v) = match (parts.next(), parts.next(), parts.next()) {
                (Some(u), Some(v), None) => (u.trim(), v.trim()),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected 'parent -> child', got '{line}'",
                        lineno + 1
                    )))
                }
            };
            named.push((u.to_string(), v.to_string()));
        }
        DagAssumptions::new(variables, &named)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn parents_of(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, c)| c == v)
            .map(|&(p, _)| p)
            .collect()
    }

    fn children_of(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(p, _)| p == v)
            .map(|&(_, c)| c)
            .collect()
    }

    /// Standard d-separation check ("Bayes ball") between two vertices given
    /// a conditioning set.
    pub fn d_separated(&self, x: usize, y: usize, given: &[usize]) -> bool {
        let cond: BTreeSet<usize> = given.iter().copied().collect();
        if cond.contains(&x) || cond.contains(&y) {
            return true;
        }
        // ancestors of the conditioning set, for collider activation
        let mut anc = cond.clone();
        let mut frontier: Vec<usize> = cond.iter().copied().collect();
        while let Some(v) = frontier.pop() {
            for p in self.parents_of(v) {
                if anc.insert(p) {
                    frontier.push(p);
                }
            }
        }
        // states: (vertex, arrived-from-child)
        let mut visited = BTreeSet::new();
        let mut queue = vec![(x, true)];
        while let Some((v, from_child)) = queue.pop() {
            if v == y {
                return false;
            }
            if !visited.insert((v, from_child)) {
                continue;
            }
            if from_child {
                if !cond.contains(&v) {
                    for p in self.parents_of(v) {
                        queue.push((p, true));
                    }
                    for c in self.children_of(v) {
                        queue.push((c, false));
                    }
                }
            } else {
                if !cond.contains(&v) {
                    for c in self.children_of(v) {
                        queue.push((c, false));
                    }
                }
                if anc.contains(&v) {
                    for p in self.parents_of(v) {
                        queue.push((p, true));
                    }
                }
            }
        }
        true
    }
}

/// Generates a named template over {X₁,Y₁,…,X_T,Y_T}; `with_z` prepends a
/// time-invariant covariate Z as a parent of X₁ and Y₁ only.
pub fn dag_template(kind: TemplateKind, t: usize, with_z: bool) -> Result<DagAssumptions> {
    if t < 2 {
        return Err(Error::Argument(format!("template horizon must be >= 2, got {t}")));
    }
    let mut variables = Vec::new();
    if with_z {
        variables.push("Z".to_string());
    }
    for i in 1..=t {
        variables.push(format!("X{i}"));
        variables.push(format!("Y{i}"));
    }

    // classify vertices: (is_outcome, time), 1-based time
    let x = |i: usize| format!("X{i}");
    let y = |i: usize| format!("Y{i}");
    let mut named: Vec<(String, String)> = Vec::new();
    if kind == TemplateKind::Combined {
        for i in 1..=t {
            named.push((x(i), y(i)));
            if i < t {
                named.push((x(i), x(i + 1)));
                named.push((y(i), y(i + 1)));
            }
        }
    } else {
        // start from the full forward edge set and filter per template
        for s in 1..=t {
            for u in [false, true] {
                for q in 1..=t {
                    for v in [false, true] {
                        let forward = q > s || (q == s && !u && v);
                        if !forward {
                            continue;
                        }
                        let keep = match kind {
                            TemplateKind::Full => true,
                            TemplateKind::TimeDependence => !(u == false && v == true && s < q),
                            TemplateKind::TimeLag => {
                                if !u && v {
                                    q == s + 1
                                } else {
                                    true
                                }
                            }
                            TemplateKind::Exogenous => !(u == true && v == false),
                            TemplateKind::MarkovCovariates => {
                                if !u && !v {
                                    q == s + 1
                                } else {
                                    true
                                }
                            }
                            TemplateKind::MarkovOutcome => {
                                if u && v {
                                    q == s + 1
                                } else {
                                    true
                                }
                            }
                            TemplateKind::Combined => unreachable!(),
                        };
                        if keep {
                            let from = if u { y(s) } else { x(s) };
                            let to = if v { y(q) } else { x(q) };
                            named.push((from, to));
                        }
                    }
                }
            }
        }
    }
    if with_z {
        named.push(("Z".to_string(), x(1)));
        named.push(("Z".to_string(), y(1)));
    }
    DagAssumptions::new(variables, &named)
}

/// Initial staging implied by the DAG: situations at a variable's depth fall
/// in the same block iff their paths agree on that variable's DAG parents.
pub fn dag_to_initial_staging(dag: &DagAssumptions, tree: &EventTree) -> Result<Staging> {
    if dag.variables() != tree.variables() {
        return Err(Error::Argument(format!(
            "DAG variables {:?} do not match tree order {:?}",
            dag.variables(),
            tree.variables()
        )));
    }
    let mut blocks = Vec::new();
    for depth in 0..tree.levels() {
        let parents = dag.parents_of(depth);
        let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for s in tree.situations_at(depth) {
            let path = tree.path_of(s);
            let key: Vec<usize> = parents.iter().map(|&p| path[p]).collect();
            groups.entry(key).or_default().push(s);
        }
        blocks.extend(groups.into_values().map(|members| StageBlock {
            members,
            forbidden: false,
        }));
    }
    Staging::from_blocks(tree, blocks)
}

/// Fits a staged tree under the Markov assumptions of `dag`: selection starts
/// from the DAG-implied staging, so DAG blocks may merge further but are
/// never split. Zero-sample isolation applies only to situations whose DAG
/// block gives them no observed stage-mates: blocks mixing observed and
/// zero-count situations stay together, while all-zero blocks become
/// forbidden grey stages.
pub fn fit_with_markov_assumptions(
    data: &Dataset,
    order: &[String],
    dag: &DagAssumptions,
    config: &FitConfig,
) -> Result<FitResult> {
    let tree = EventTree::build(data, order, config.missing_mode)?;
    let hyper = default_hyperstage(&tree, config.policy);
    let dag_staging = dag_to_initial_staging(dag, &tree)?;

    // per hyperstage class, pool the members of all-zero DAG blocks into one
    // forbidden block
    let mut zero_of_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut blocks = Vec::new();
    for b in dag_staging.blocks() {
        if b.members.iter().all(|&s| tree.incoming_count(s) == 0) {
            zero_of_class
                .entry(hyper.class_of(b.members[0]))
                .or_default()
                .extend(&b.members);
        } else {
            blocks.push(b.clone());
        }
    }
    blocks.extend(zero_of_class.into_values().map(|members| StageBlock {
        members,
        forbidden: true,
    }));
    let initial = Staging::from_blocks(&tree, blocks)?;
    if !hyper.respects(&initial) {
        return Err(Error::Argument(
            "DAG staging crosses hyperstage classes; use the same-labels policy".into(),
        ));
    }
    fit_from_initial(tree, initial, &hyper, config)
}

/// Fits an independent staged tree per margin.
pub fn fit_marginal_sequence(
    data: &Dataset,
    margins: &[MarginSpec],
    config: &FitConfig,
) -> Result<Vec<FitResult>> {
    margins
        .iter()
        .map(|m| {
            let projected = project_margin(data, m)?;
            fit_full(&projected, &m.variables, config)
        })
        .collect()
}

/// Per-depth block differences between two stagings of the same tree shape.
#[derive(Debug, Clone)]
pub struct StagingDiff {
    /// (depth, block members) present in the first staging only.
    pub only_in_a: Vec<(usize, Vec<usize>)>,
    /// (depth, block members) present in the second staging only.
    pub only_in_b: Vec<(usize, Vec<usize>)>,
    /// Adjusted Rand index over the situation partitions; 1 when identical.
    pub agreement: f64,
}

impl StagingDiff {
    pub fn is_empty(&self) -> bool {
        self.only_in_a.is_empty() && self.only_in_b.is_empty()
    }
}

pub fn compare_stagings(a: &StagedTree, b: &StagedTree) -> Result<StagingDiff> {
    if !a.tree.same_topology(&b.tree) {
        return Err(Error::Argument(
            "stagings belong to trees with different topologies".into(),
        ));
    }
    let blocks = |st: &StagedTree| -> BTreeSet<(usize, Vec<usize>)> {
        st.staging
            .blocks()
            .iter()
            .map(|bl| (st.tree.depth_of(bl.members[0]), bl.members.clone()))
            .collect()
    };
    let (set_a, set_b) = (blocks(a), blocks(b));
    let only_in_a: Vec<_> = set_a.difference(&set_b).cloned().collect();
    let only_in_b: Vec<_> = set_b.difference(&set_a).cloned().collect();
    let agreement = adjusted_rand_index(&a.staging, &b.staging);
    Ok(StagingDiff {
        only_in_a,
        only_in_b,
        agreement,
    })
}

/// Adjusted Rand index between two partitions of the same element set; by
/// convention 1.0 when the expected index equals the maximum (both partitions
/// degenerate).
fn adjusted_rand_index(a: &Staging, b: &Staging) -> f64 {
    let n = a.n_situations();
    debug_assert_eq!(n, b.n_situations());
    let comb2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let mut cell: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut row = vec![0u64; a.n_stages()];
    let mut col = vec![0u64; b.n_stages()];
    for s in 0..n {
        *cell.entry((a.stage_of(s), b.stage_of(s))).or_insert(0) += 1;
        row[a.stage_of(s)] += 1;
        col[b.stage_of(s)] += 1;
    }
    let sum_cells: f64 = cell.values().map(|&x| comb2(x)).sum();
    let sum_rows: f64 = row.iter().map(|&x| comb2(x)).sum();
    let sum_cols: f64 = col.iter().map(|&x| comb2(x)).sum();
    let total = comb2(n as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_rows * sum_cols / total;
    let max = 0.5 * (sum_rows + sum_cols);
    if (max - expected).abs() < 1e-15 {
        return 1.0;
    }
    (sum_cells - expected) / (max - expected)
}
