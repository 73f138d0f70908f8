//! DOT and JSON export of staged trees and chain event graphs.

use crate::ceg::{Ceg, StagedTree};
use crate::error::Result;

/// Fixed palette (ColorBrewer "Paired"); cycles when there are more than 12
/// multi-member stages.
pub const PALETTE: [&str; 12] = [
    "#a6cee3", "#1f78b4", "#b2df8a", "#33a02c", "#fb9a99", "#e31a1c",
    "#fdbf6f", "#ff7f00", "#cab2d6", "#6a3d9a", "#ffff99", "#b15928",
];

const ZERO_FILL: &str = "#bdbdbd";

/// Fill color per stage: palette entries for multi-member observed stages
/// (assigned by descending size, ties by minimal member), white for
/// singletons, grey for forbidden zero-sample blocks.
pub fn stage_fills(staged: &StagedTree) -> Vec<String> {
    let blocks = staged.staging.blocks();
    let mut ranked: Vec<usize> = (0..blocks.len())
        .filter(|&i| !blocks[i].forbidden && blocks[i].members.len() > 1)
        .collect();
    ranked.sort_by_key(|&i| (std::cmp::Reverse(blocks[i].members.len()), blocks[i].members[0]));
    let mut fills = vec![String::from("white"); blocks.len()];
    for (rank, &i) in ranked.iter().enumerate() {
        fills[i] = PALETTE[rank % PALETTE.len()].to_string();
    }
    for (i, b) in blocks.iter().enumerate() {
        if b.forbidden {
            fills[i] = ZERO_FILL.to_string();
        }
    }
    fills
}

fn edge_label(category: &str, probability: Option<f64>) -> String {
    match probability {
        Some(p) => format!("{category} ({p:.2})"),
        None => category.to_string(),
    }
}

/// DOT document for a chain event graph: round colored vertices, grey square
/// zero-sample vertices, grey dotted zero-sample edges, a single sink labeled
/// w_inf. Byte-deterministic for identical inputs.
pub fn ceg_to_dot(staged: &StagedTree, ceg: &Ceg) -> String {
    let fills = stage_fills(staged);
    let mut out = String::from("digraph ceg {\n  rankdir=LR;\n  node [style=filled];\n");
    for node in &ceg.nodes {
        if node.id == ceg.sink {
            out.push_str(&format!(
                "  w{} [label=\"w_inf\", shape=circle, fillcolor=white];\n",
                node.id
            ));
        } else if node.zero_sample {
            out.push_str(&format!(
                "  w{} [label=\"w{}\", shape=square, fillcolor=\"{ZERO_FILL}\"];\n",
                node.id, node.id
            ));
        } else {
            let fill = &fills[node.stage.unwrap()];
            let quoted = if fill == "white" { fill.clone() } else { format!("\"{fill}\"") };
            out.push_str(&format!(
                "  w{} [label=\"w{}\", shape=circle, fillcolor={quoted}];\n",
                node.id, node.id
            ));
        }
    }
    for e in &ceg.edges {
        let style = if e.zero_sample {
            ", color=\"#bdbdbd\", fontcolor=\"#bdbdbd\", style=dotted"
        } else {
            ""
        };
        out.push_str(&format!(
            "  w{} -> w{} [label=\"{}\"{style}];\n",
            e.from,
            e.to,
            edge_label(&e.label, e.probability)
        ));
    }
    out.push_str("}\n");
    out
}

/// DOT document for a staged tree: one vertex per situation colored by stage,
/// leaves as points, zero-sample situations as grey squares with grey dotted
/// outgoing edges.
pub fn staged_tree_to_dot(staged: &StagedTree) -> String {
    let tree = &staged.tree;
    let fills = stage_fills(staged);
    let mut out = String::from("digraph staged_tree {\n  rankdir=LR;\n  node [style=filled];\n");
    for s in 0..tree.n_situations() {
        let stage = staged.staging.stage_of(s);
        if staged.zero_sample(s) {
            out.push_str(&format!(
                "  s{s} [label=\"s{s}\", shape=square, fillcolor=\"{ZERO_FILL}\"];\n"
            ));
        } else {
            let fill = &fills[stage];
            let quoted = if fill == "white" { fill.clone() } else { format!("\"{fill}\"") };
            out.push_str(&format!(
                "  s{s} [label=\"s{s}\", shape=circle, fillcolor={quoted}];\n"
            ));
        }
    }
    let last = tree.levels() - 1;
    for s in tree.situations_at(last) {
        for c in 0..tree.out_degree(s) {
            let l = tree.leaf_index(s, c).unwrap();
            out.push_str(&format!("  l{l} [label=\"\", shape=point];\n"));
        }
    }
    for s in 0..tree.n_situations() {
        let depth = tree.depth_of(s);
        let zero = staged.zero_sample(s);
        for c in 0..tree.out_degree(s) {
            let prob = staged
                .probabilities
                .as_ref()
                .map(|p| p.probabilities(s)[c]);
            let style = if zero || tree.counts(s)[c] == 0 {
                ", color=\"#bdbdbd\", fontcolor=\"#bdbdbd\", style=dotted"
            } else {
                ""
            };
            let target = match tree.child_situation(s, c) {
                Some(ch) => format!("s{ch}"),
                None => format!("l{}", tree.leaf_index(s, c).unwrap()),
            };
            out.push_str(&format!(
                "  s{s} -> {target} [label=\"{}\"{style}];\n",
                edge_label(&tree.categories_at(depth)[c], prob)
            ));
        }
    }
    out.push_str("}\n");
    out
}

#[derive(serde::Serialize)]
struct StageDump<'a> {
    id: usize,
    members: &'a [usize],
    forbidden: bool,
    fill: &'a str,
}

#[derive(serde::Serialize)]
struct CegDump<'a> {
    variables: &'a [String],
    stages: Vec<StageDump<'a>>,
    nodes: &'a [crate::ceg::CegNode],
    edges: &'a [crate::ceg::CegEdge],
    sink: usize,
}

/// Structural JSON dump: variables, stages (with fills), CEG vertices with
/// member situations and zero-sample flags, and edges with labels, pooled
/// counts and probabilities.
pub fn ceg_to_json(staged: &StagedTree, ceg: &Ceg) -> Result<String> {
    let fills = stage_fills(staged);
    let stages: Vec<StageDump> = staged
        .staging
        .blocks()
        .iter()
        .enumerate()
        .map(|(id, b)| StageDump {
            id,
            members: &b.members,
            forbidden: b.forbidden,
            fill: &fills[id],
        })
        .collect();
    let dump = CegDump {
        variables: staged.tree.variables(),
        stages,
        nodes: &ceg.nodes,
        edges: &ceg.edges,
        sink: ceg.sink,
    };
    serde_json::to_string_pretty(&dump)
        .map_err(|e| crate::error::Error::State(format!("json serialization failed: {e}")))
}
