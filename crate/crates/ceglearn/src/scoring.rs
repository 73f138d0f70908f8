//! Dirichlet-multinomial marginal likelihoods, Bayes factors for stage merges
//! and transition-probability estimation.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::prior::PriorSpec;
use crate::staging::Staging;
use crate::tree::EventTree;

/// Log marginal likelihood of counts `n` under a Dirichlet(`alpha`) prior:
/// ln Γ(Σα) − ln Γ(Σα+Σn) + Σ_k [ln Γ(α_k+n_k) − ln Γ(α_k)].
/// Equals 0 when all counts are zero.
pub fn stage_log_ml(n: &[u64], alpha: &[f64]) -> Result<f64> {
    if n.len() != alpha.len() {
        return Err(Error::Argument(format!(
            "count vector has length {}, alpha vector {}",
            n.len(),
            alpha.len()
        )));
    }
    if n.len() < 2 {
        return Err(Error::Argument("vectors need at least 2 entries".into()));
    }
    if alpha.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Argument("alpha entries must be positive".into()));
    }
    let a_sum: f64 = alpha.iter().sum();
    let n_sum: u64 = n.iter().sum();
    let mut total = ln_gamma(a_sum) - ln_gamma(a_sum + n_sum as f64);
    for (&nk, &ak) in n.iter().zip(alpha) {
        total += ln_gamma(ak + nk as f64) - ln_gamma(ak);
    }
    Ok(total)
}

/// Aggregated counts and prior mass of one stage.
#[derive(Debug, Clone)]
pub struct StageData {
    pub members: Vec<usize>,
    pub labels: Vec<String>,
    pub n: Vec<u64>,
    pub alpha: Vec<f64>,
}

impl StageData {
    /// Elementwise sums over the block's member situations.
    pub fn gather(tree: &EventTree, prior: &PriorSpec, members: &[usize]) -> StageData {
        let depth = tree.depth_of(members[0]);
        let k = tree.categories_at(depth).len();
        let mut n = vec![0u64; k];
        let mut alpha = vec![0f64; k];
        for &s in members {
            for (c, &count) in tree.counts(s).iter().enumerate() {
                n[c] += count;
            }
            for (c, &a) in prior.alpha(s).iter().enumerate() {
                alpha[c] += a;
            }
        }
        StageData {
            members: members.to_vec(),
            labels: tree.categories_at(depth).to_vec(),
            n,
            alpha,
        }
    }

    pub fn log_ml(&self) -> Result<f64> {
        stage_log_ml(&self.n, &self.alpha)
    }

    pub fn sample_size(&self) -> u64 {
        self.n.iter().sum()
    }
}

/// Log Bayes factor in favour of merging stages `u` and `v`. Symmetric.
pub fn merge_log_bayes_factor(u: &StageData, v: &StageData) -> Result<f64> {
    if u.labels != v.labels {
        return Err(Error::Argument(
            "stages have different outgoing edge labels".into(),
        ));
    }
    let n: Vec<u64> = u.n.iter().zip(&v.n).map(|(a, b)| a + b).collect();
    let alpha: Vec<f64> = u.alpha.iter().zip(&v.alpha).map(|(a, b)| a + b).collect();
    Ok(stage_log_ml(&n, &alpha)? - u.log_ml()? - v.log_ml()?)
}

/// Total log score of a staging: the sum of stage log marginal likelihoods
/// under a uniform model prior.
pub fn staging_log_score(tree: &EventTree, staging: &Staging, prior: &PriorSpec) -> Result<f64> {
    staging.validate_for(tree)?;
    let mut total = 0.0;
    for block in staging.blocks() {
        total += StageData::gather(tree, prior, &block.members).log_ml()?;
    }
    Ok(total)
}

/// Probability estimator for stage transition vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimator {
    Map,
    #[default]
    PosteriorMean,
}

impl Estimator {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "map" => Ok(Self::Map),
            "mean" => Ok(Self::PosteriorMean),
            _ => Err(Error::Argument(format!(
                "unknown estimator '{s}' (expected map|mean)"
            ))),
        }
    }
}

/// Estimated edge probabilities, one vector per situation; situations in the
/// same stage carry identical vectors.
#[derive(Debug, Clone)]
pub struct EdgeProbabilities {
    pub estimator: Estimator,
    probs: Vec<Vec<f64>>,
    prior_only: Vec<bool>,
    /// Stages where the Dirichlet mode was undefined and the posterior mean
    /// was used instead.
    pub map_fallback_stages: Vec<usize>,
}

impl EdgeProbabilities {
    pub fn probabilities(&self, situation: usize) -> &[f64] {
        &self.probs[situation]
    }

    /// True when the situation's stage has no observations, so its vector is
    /// purely the prior.
    pub fn prior_only(&self, situation: usize) -> bool {
        self.prior_only[situation]
    }
}

/// Posterior-mean gives (α_k+n_k)/Σ(α+n); MAP gives (α_k+n_k−1)/(Σ(α+n)−K)
/// when every posterior parameter exceeds 1, otherwise that stage falls back
/// to the posterior mean.
pub fn estimate_probabilities(
    tree: &EventTree,
    staging: &Staging,
    prior: &PriorSpec,
    estimator: Estimator,
) -> Result<EdgeProbabilities> {
    staging.validate_for(tree)?;
    let mut probs = vec![Vec::new(); tree.n_situations()];
    let mut prior_only = vec![false; tree.n_situations()];
    let mut map_fallback_stages = Vec::new();
    for (stage_id, block) in staging.blocks().iter().enumerate() {
        let data = StageData::gather(tree, prior, &block.members);
        let post: Vec<f64> = data
            .n
            .iter()
            .zip(&data.alpha)
            .map(|(&n, &a)| a + n as f64)
            .collect();
        let vector = match estimator {
            Estimator::Map if post.iter().all(|&x| x > 1.0) => {
                let denom: f64 = post.iter().sum::<f64>() - post.len() as f64;
                post.iter().map(|&x| (x - 1.0) / denom).collect::<Vec<_>>()
            }
            Estimator::Map => {
                map_fallback_stages.push(stage_id);
                let denom: f64 = post.iter().sum();
                post.iter().map(|&x| x / denom).collect()
            }
            Estimator::PosteriorMean => {
                let denom: f64 = post.iter().sum();
                post.iter().map(|&x| x / denom).collect()
            }
        };
        let zero_sample = data.sample_size() == 0;
        for &s in &block.members {
            probs[s] = vector.clone();
            prior_only[s] = zero_sample;
        }
    }
    Ok(EdgeProbabilities {
        estimator,
        probs,
        prior_only,
        map_fallback_stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::load_dataset;
    use crate::staging::{Staging, StageBlock};
    use crate::tree::MissingMode;

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn log_ml_examples() {
        close(stage_log_ml(&[0, 0], &[1.0, 1.0]).unwrap(), 0.0);
        close(stage_log_ml(&[1, 0], &[1.0, 1.0]).unwrap(), (0.5f64).ln());
        close(stage_log_ml(&[2, 1], &[1.0, 1.0]).unwrap(), (1.0f64 / 12.0).ln());
    }

    #[test]
    fn log_ml_length_mismatch() {
        assert_eq!(
            stage_log_ml(&[1, 2, 3], &[1.0, 1.0]).unwrap_err().category(),
            "argument"
        );
    }

    #[test]
    fn bayes_factor_example() {
        let u = StageData {
            members: vec![0],
            labels: vec!["a".into(), "b".into()],
            n: vec![1, 0],
            alpha: vec![1.0, 1.0],
        };
        let v = StageData {
            members: vec![1],
            labels: vec!["a".into(), "b".into()],
            n: vec![0, 1],
            alpha: vec![1.0, 1.0],
        };
        close(merge_log_bayes_factor(&u, &v).unwrap(), (0.8f64).ln());
        close(
            merge_log_bayes_factor(&u, &v).unwrap(),
            merge_log_bayes_factor(&v, &u).unwrap(),
        );
    }

    #[test]
    fn bayes_factor_no_data_is_neutral() {
        let u = StageData {
            members: vec![0],
            labels: vec!["a".into(), "b".into()],
            n: vec![0, 0],
            alpha: vec![0.5, 0.5],
        };
        close(merge_log_bayes_factor(&u, &u.clone()).unwrap(), 0.0);
    }

    #[test]
    fn bayes_factor_label_mismatch() {
        let u = StageData {
            members: vec![0],
            labels: vec!["a".into(), "b".into()],
            n: vec![0, 0],
            alpha: vec![0.5, 0.5],
        };
        let v = StageData {
            labels: vec!["x".into(), "y".into()],
            ..u.clone()
        };
        assert!(merge_log_bayes_factor(&u, &v).is_err());
    }

    #[test]
    fn estimator_examples() {
        let d = load_dataset("V\nN\nN\nN\nA\n".as_bytes(), None).unwrap();
        let order = vec!["V".to_string()];
        let tree = crate::tree::EventTree::build(&d, &order, MissingMode::PrefixCount).unwrap();
        let prior = crate::prior::assign_mass_conserving_prior(&tree, 2.0).unwrap();
        let staging = Staging::singletons(&tree);
        // counts (A,N) = (1,3), alpha = (1,1)
        let mean = estimate_probabilities(&tree, &staging, &prior, Estimator::PosteriorMean).unwrap();
        close(mean.probabilities(0)[1], 2.0 / 3.0);
        close(mean.probabilities(0)[0], 1.0 / 3.0);
        let map = estimate_probabilities(&tree, &staging, &prior, Estimator::Map).unwrap();
        close(map.probabilities(0)[1], 3.0 / 4.0);
        close(map.probabilities(0)[0], 1.0 / 4.0);
        assert!(map.map_fallback_stages.is_empty());
    }

    #[test]
    fn map_falls_back_when_mode_undefined() {
        // posterior parameter for the unseen category is 0.25 <= 1
        let schema = vec![crate::data::VariableSchema::new(
            "V",
            vec!["A".into(), "N".into()],
        )];
        let d = load_dataset("V\nN\nN\n".as_bytes(), Some(&schema)).unwrap();
        let order = vec!["V".to_string()];
        let tree = crate::tree::EventTree::build(&d, &order, MissingMode::PrefixCount).unwrap();
        let prior = crate::prior::assign_mass_conserving_prior(&tree, 0.5).unwrap();
        let staging = Staging::singletons(&tree);
        let map = estimate_probabilities(&tree, &staging, &prior, Estimator::Map).unwrap();
        assert_eq!(map.map_fallback_stages, vec![0]);
        close(map.probabilities(0)[1], 2.25 / 2.5);
    }

    #[test]
    fn probabilities_sum_to_one_and_match_within_stage() {
        let d = load_dataset("V1,V2\nA,x\nA,y\nB,x\n".as_bytes(), None).unwrap();
        let order = vec!["V1".to_string(), "V2".to_string()];
        let tree = crate::tree::EventTree::build(&d, &order, MissingMode::PrefixCount).unwrap();
        let prior = crate::prior::assign_mass_conserving_prior(&tree, 3.0).unwrap();
        let staging = Staging::from_blocks(
            &tree,
            vec![
                StageBlock { members: vec![0], forbidden: false },
                StageBlock { members: vec![1, 2], forbidden: false },
            ],
        )
        .unwrap();
        let probs = estimate_probabilities(&tree, &staging, &prior, Estimator::PosteriorMean).unwrap();
        for s in 0..tree.n_situations() {
            let sum: f64 = probs.probabilities(s).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        assert_eq!(probs.probabilities(1), probs.probabilities(2));
    }

    #[test]
    fn score_additivity() {
        let d = load_dataset("V1,V2\nA,x\nA,y\nB,x\n".as_bytes(), None).unwrap();
        let order = vec!["V1".to_string(), "V2".to_string()];
        let tree = crate::tree::EventTree::build(&d, &order, MissingMode::PrefixCount).unwrap();
        let prior = crate::prior::assign_mass_conserving_prior(&tree, 2.0).unwrap();
        let finest = Staging::singletons(&tree);
        let coarser = finest.merged(1, 2);
        let u = StageData::gather(&tree, &prior, &[1]);
        let v = StageData::gather(&tree, &prior, &[2]);
        let bf = merge_log_bayes_factor(&u, &v).unwrap();
        let fine_score = staging_log_score(&tree, &finest, &prior).unwrap();
        let coarse_score = staging_log_score(&tree, &coarser, &prior).unwrap();
        assert!((coarse_score - fine_score - bf).abs() < 1e-9);
    }
}
