//! Mass-conserving Dirichlet prior assignment.

use crate::error::{Error, Result};
use crate::tree::EventTree;

/// Dirichlet hyperparameters per event-tree edge. The total prior mass at the
/// root equals the equivalent sample size and is conserved down the tree:
/// each situation splits its incoming mass equally over its outgoing edges.
#[derive(Debug, Clone)]
pub struct PriorSpec {
    pub equivalent_sample_size: f64,
    alpha: Vec<Vec<f64>>,
}

impl PriorSpec {
    pub fn alpha(&self, situation: usize) -> &[f64] {
        &self.alpha[situation]
    }
}

pub fn assign_mass_conserving_prior(tree: &EventTree, alpha_bar: f64) -> Result<PriorSpec> {
    if !(alpha_bar > 0.0) {
        return Err(Error::Argument(format!(
            "equivalent sample size must be positive, got {alpha_bar}"
        )));
    }
    let mut alpha: Vec<Vec<f64>> = Vec::with_capacity(tree.n_situations());
    let mut incoming = vec![alpha_bar; 1];
    for s in 0..tree.n_situations() {
        let mass = incoming[s];
        let k = tree.out_degree(s);
        let per_edge = mass / k as f64;
        alpha.push(vec![per_edge; k]);
        for c in 0..k {
            if tree.child_situation(s, c).is_some() {
                incoming.push(per_edge);
            }
        }
    }
    Ok(PriorSpec {
        equivalent_sample_size: alpha_bar,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_dataset;
    use crate::tree::MissingMode;

    fn tree(csv: &str, order: &[&str]) -> EventTree {
        let d = load_dataset(csv.as_bytes(), None).unwrap();
        let order: Vec<String> = order.iter().map(|s| s.to_string()).collect();
        EventTree::build(&d, &order, MissingMode::PrefixCount).unwrap()
    }

    #[test]
    fn binary_two_level_split() {
        let t = tree("V1,V2\nA,x\nB,y\n", &["V1", "V2"]);
        let p = assign_mass_conserving_prior(&t, 4.0).unwrap();
        assert_eq!(p.alpha(0), &[2.0, 2.0]);
        for s in t.situations_at(1) {
            assert_eq!(p.alpha(s), &[1.0, 1.0]);
        }
    }

    #[test]
    fn three_root_edges() {
        let t = tree("V\na\nb\nc\n", &["V"]);
        let p = assign_mass_conserving_prior(&t, 3.0).unwrap();
        assert_eq!(p.alpha(0), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn five_binary_levels_leaf_alpha() {
        let mut text = String::from("A,B,C,D,E\n");
        for i in 0..2u32 {
            for j in 0..2u32 {
                text.push_str(&format!("{i},{j},{i},{j},{i}\n"));
            }
        }
        let t = tree(&text, &["A", "B", "C", "D", "E"]);
        let p = assign_mass_conserving_prior(&t, 2.0).unwrap();
        for s in t.situations_at(4) {
            assert_eq!(p.alpha(s), &[0.0625, 0.0625]);
        }
    }

    #[test]
    fn mass_conservation() {
        let t = tree("V1,V2,V3\nA,x,1\nB,y,2\nA,z,3\n", &["V1", "V2", "V3"]);
        let p = assign_mass_conserving_prior(&t, 1.7).unwrap();
        let root_sum: f64 = p.alpha(0).iter().sum();
        assert!((root_sum - 1.7).abs() < 1e-12);
        for s in 1..t.n_situations() {
            let (parent, c) = t.parent(s).unwrap();
            let incoming = p.alpha(parent)[c];
            let out: f64 = p.alpha(s).iter().sum();
            assert!((out - incoming).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_mass() {
        let t = tree("V\na\nb\n", &["V"]);
        assert!(assign_mass_conserving_prior(&t, 0.0).is_err());
    }
}
