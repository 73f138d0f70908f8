//! Python bindings: fit staged trees / chain event graphs from CSV files and
//! inspect stages, probabilities and exports.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ceglearn::data::{load_dataset, MarginSpec};
use ceglearn::export::{ceg_to_dot, ceg_to_json, staged_tree_to_dot};
use ceglearn::longitudinal::{
    dag_template, fit_marginal_sequence, fit_with_markov_assumptions, DagAssumptions, TemplateKind,
};
use ceglearn::scoring::Estimator;
use ceglearn::staging::HyperstagePolicy;
use ceglearn::tree::MissingMode;
use ceglearn::workflow::{conditional_probability, fit_full, FitConfig};

fn err(e: ceglearn::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn config(
    alpha_bar: Option<f64>,
    estimator: &str,
    policy: &str,
    missing: &str,
) -> PyResult<FitConfig> {
    let estimator = Estimator::parse(estimator).map_err(err)?;
    let policy = match policy {
        "same-labels" => HyperstagePolicy::SameLabels,
        "same-variable" => HyperstagePolicy::SameVariable,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown policy '{other}' (expected same-labels|same-variable)"
            )))
        }
    };
    let missing_mode = match missing {
        "prefix" => MissingMode::PrefixCount,
        "complete-case" => MissingMode::CompleteCase,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown missing mode '{other}' (expected prefix|complete-case)"
            )))
        }
    };
    Ok(FitConfig {
        alpha_bar,
        estimator,
        policy,
        missing_mode,
    })
}

fn load(path: &str) -> PyResult<ceglearn::Dataset> {
    let bytes = std::fs::read(path)
        .map_err(|e| PyValueError::new_err(format!("cannot read {path}: {e}")))?;
    load_dataset(&bytes[..], None).map_err(err)
}

/// A fitted staged tree with its chain event graph.
#[pyclass(name = "FitResult")]
struct PyFitResult {
    inner: ceglearn::workflow::FitResult,
}

#[pymethods]
impl PyFitResult {
    fn log_score(&self) -> f64 {
        self.inner.log_score()
    }

    fn n_situations(&self) -> usize {
        self.inner.staged_tree.tree.n_situations()
    }

    fn n_stages(&self) -> usize {
        self.inner.staged_tree.staging.n_stages()
    }

    fn n_positions(&self) -> usize {
        self.inner.ceg.n_positions()
    }

    fn variables(&self) -> Vec<String> {
        self.inner.staged_tree.tree.variables().to_vec()
    }

    fn stage_of(&self, situation: usize) -> PyResult<usize> {
        if situation >= self.inner.staged_tree.tree.n_situations() {
            return Err(PyValueError::new_err(format!(
                "situation {situation} out of range"
            )));
        }
        Ok(self.inner.staged_tree.staging.stage_of(situation))
    }

    /// Stage members, one list of situation indexes per stage.
    fn stages(&self) -> Vec<Vec<usize>> {
        self.inner
            .staged_tree
            .staging
            .blocks()
            .iter()
            .map(|b| b.members.clone())
            .collect()
    }

    /// Estimated edge probabilities out of a situation.
    fn probabilities(&self, situation: usize) -> PyResult<Vec<f64>> {
        if situation >= self.inner.staged_tree.tree.n_situations() {
            return Err(PyValueError::new_err(format!(
                "situation {situation} out of range"
            )));
        }
        let probs = self
            .inner
            .staged_tree
            .probabilities
            .as_ref()
            .expect("fit results carry probabilities");
        Ok(probs.probabilities(situation).to_vec())
    }

    /// P(variable at `depth` = `category` | prefix of earlier values).
    fn conditional_probability(
        &self,
        prefix: Vec<usize>,
        depth: usize,
        category: usize,
    ) -> PyResult<f64> {
        conditional_probability(&self.inner.staged_tree, &prefix, depth, category).map_err(err)
    }

    /// Accepted merges as (situation_a, situation_b, log_bayes_factor).
    fn trace(&self) -> Vec<(usize, usize, f64)> {
        self.inner
            .trace
            .steps
            .iter()
            .map(|s| (s.pair.0, s.pair.1, s.log_bayes_factor))
            .collect()
    }

    fn ceg_dot(&self) -> String {
        ceg_to_dot(&self.inner.staged_tree, &self.inner.ceg)
    }

    fn tree_dot(&self) -> String {
        staged_tree_to_dot(&self.inner.staged_tree)
    }

    fn ceg_json(&self) -> PyResult<String> {
        ceg_to_json(&self.inner.staged_tree, &self.inner.ceg).map_err(err)
    }
}

/// Fits a staged tree over the full variable order of a CSV file.
#[pyfunction]
#[pyo3(signature = (path, order, alpha_bar=None, estimator="mean", policy="same-labels", missing="prefix"))]
fn fit(
    path: &str,
    order: Vec<String>,
    alpha_bar: Option<f64>,
    estimator: &str,
    policy: &str,
    missing: &str,
) -> PyResult<PyFitResult> {
    let data = load(path)?;
    let cfg = config(alpha_bar, estimator, policy, missing)?;
    let inner = fit_full(&data, &order, &cfg).map_err(err)?;
    Ok(PyFitResult { inner })
}

/// Fits under the Markov assumptions of a DAG given as (parent, child) pairs.
#[pyfunction]
#[pyo3(signature = (path, order, edges, alpha_bar=None, estimator="mean", policy="same-labels", missing="prefix"))]
fn fit_markov(
    path: &str,
    order: Vec<String>,
    edges: Vec<(String, String)>,
    alpha_bar: Option<f64>,
    estimator: &str,
    policy: &str,
    missing: &str,
) -> PyResult<PyFitResult> {
    let data = load(path)?;
    let cfg = config(alpha_bar, estimator, policy, missing)?;
    let dag = DagAssumptions::new(order.clone(), &edges).map_err(err)?;
    let inner = fit_with_markov_assumptions(&data, &order, &dag, &cfg).map_err(err)?;
    Ok(PyFitResult { inner })
}

/// Fits one staged tree per margin (list of variable-name lists).
#[pyfunction]
#[pyo3(signature = (path, margins, alpha_bar=None, estimator="mean", policy="same-labels", missing="prefix"))]
fn fit_marginal(
    path: &str,
    margins: Vec<Vec<String>>,
    alpha_bar: Option<f64>,
    estimator: &str,
    policy: &str,
    missing: &str,
) -> PyResult<Vec<PyFitResult>> {
    let data = load(path)?;
    let cfg = config(alpha_bar, estimator, policy, missing)?;
    let specs: Vec<MarginSpec> = margins
        .into_iter()
        .map(MarginSpec::new)
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let fits = fit_marginal_sequence(&data, &specs, &cfg).map_err(err)?;
    Ok(fits.into_iter().map(|inner| PyFitResult { inner }).collect())
}

/// Edge list of a named Markov template over X1,Y1,...,XT,YT.
#[pyfunction]
#[pyo3(signature = (kind, t, with_z=false))]
fn template_edges(kind: &str, t: usize, with_z: bool) -> PyResult<Vec<(String, String)>> {
    let dag = dag_template(TemplateKind::parse(kind).map_err(err)?, t, with_z).map_err(err)?;
    Ok(dag
        .edges()
        .iter()
        .map(|&(u, v)| (dag.variables()[u].clone(), dag.variables()[v].clone()))
        .collect())
}

#[pymodule]
fn ceglearn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFitResult>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(fit_markov, m)?)?;
    m.add_function(wrap_pyfunction!(fit_marginal, m)?)?;
    m.add_function(wrap_pyfunction!(template_edges, m)?)?;
    Ok(())
}
