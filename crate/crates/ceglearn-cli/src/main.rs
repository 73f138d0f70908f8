//! Command-line front end: fit staged trees and chain event graphs from CSV
//! data, with Markov-assumption and marginal workflows, graph export, an
//! exhaustive-selection oracle and staging diffs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ceglearn::ceg::{build_ceg, StagedTree};
use ceglearn::data::{load_dataset, Dataset, MarginSpec};
use ceglearn::export::{ceg_to_dot, ceg_to_json, staged_tree_to_dot};
use ceglearn::longitudinal::{
    compare_stagings, dag_template, fit_marginal_sequence, fit_with_markov_assumptions,
    DagAssumptions, TemplateKind,
};
use ceglearn::prior::assign_mass_conserving_prior;
use ceglearn::scoring::{Estimator, StageData};
use ceglearn::selection::{exhaustive_select, SelectionTrace};
use ceglearn::staging::{default_hyperstage, HyperstagePolicy};
use ceglearn::tree::{EventTree, MissingMode};
use ceglearn::workflow::{fit_full, FitConfig, FitResult};
use ceglearn::Error;

#[derive(Parser)]
#[command(name = "ceglearn", about = "Staged trees and chain event graphs for categorical data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// CSV input file
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated variable order
    #[arg(long)]
    order: Option<String>,
    /// Equivalent sample size (default: maximum out-degree)
    #[arg(long = "alpha-bar")]
    alpha_bar: Option<f64>,
    /// Probability estimator: map | mean
    #[arg(long)]
    estimator: Option<String>,
    /// Hyperstage policy: same-labels | same-variable
    #[arg(long)]
    policy: Option<String>,
    /// Missing-data handling: prefix | complete-case
    #[arg(long)]
    missing: Option<String>,
    /// Output directory for artifacts
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// Also write the selection trace
    #[arg(long)]
    trace: bool,
    /// Flat key=value config file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a staged tree over the full variable order
    Fit(CommonArgs),
    /// Fit under the Markov assumptions of a DAG
    Markov {
        #[command(flatten)]
        common: CommonArgs,
        /// Template name: full | time-dependence | time-lag | exogenous |
        /// markov-covariates | markov-outcome | combined
        #[arg(long)]
        template: Option<String>,
        /// Number of time slices for the template
        #[arg(short = 'T', long = "slices")]
        t: Option<usize>,
        /// Prepend a time-invariant covariate Z to the template
        #[arg(long = "with-z")]
        with_z: bool,
        /// Edge-list file ("parent -> child" per line) instead of a template
        #[arg(long)]
        dag: Option<PathBuf>,
    },
    /// Fit one staged tree per margin
    Marginal {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated variable list; repeatable
        #[arg(long = "margin")]
        margins: Vec<String>,
    },
    /// Fit and print a single artifact to stdout
    Export {
        #[command(flatten)]
        common: CommonArgs,
        /// graph | json
        #[arg(long, default_value = "graph")]
        format: String,
    },
    /// Exhaustive model selection on small inputs
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
        /// Largest admissible hyperstage class
        #[arg(long = "max-class-size", default_value_t = 8)]
        max_class_size: usize,
    },
    /// Compare the stagings of two marginal fits
    Diff {
        #[command(flatten)]
        common: CommonArgs,
        /// Exactly two comma-separated margins
        #[arg(long = "margin")]
        margins: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {}", e.category(), message_of(&e));
            ExitCode::FAILURE
        }
    }
}

/// Message part of the error without the category prefix.
fn message_of(e: &Error) -> String {
    let s = e.to_string();
    match s.split_once(": ") {
        Some((_, rest)) => rest.to_string(),
        None => s,
    }
}

/// Resolved run parameters after merging config-file defaults and flags.
struct Resolved {
    data: Dataset,
    order: Vec<String>,
    fit: FitConfig,
    out_dir: PathBuf,
    trace: bool,
    extra: Vec<(String, String)>,
}

fn resolve(common: CommonArgs) -> Result<Resolved, Error> {
    resolve_with(common, true)
}

/// `need_order` is false for subcommands whose margins carry their own
/// variable orders.
fn resolve_with(mut common: CommonArgs, need_order: bool) -> Result<Resolved, Error> {
    let mut extra = Vec::new();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read config {}: {e}", path.display())))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("config line {}: expected key=value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim().to_string());
            match key {
                "input" if common.input.is_none() => common.input = Some(PathBuf::from(value)),
                "order" if common.order.is_none() => common.order = Some(value),
                "alpha-bar" if common.alpha_bar.is_none() => {
                    common.alpha_bar = Some(value.parse().map_err(|_| {
                        Error::Parse(format!("config line {}: bad alpha-bar", lineno + 1))
                    })?)
                }
                "estimator" if common.estimator.is_none() => common.estimator = Some(value),
                "policy" if common.policy.is_none() => common.policy = Some(value),
                "missing" if common.missing.is_none() => common.missing = Some(value),
                "out-dir" if common.out_dir.is_none() => common.out_dir = Some(PathBuf::from(value)),
                "trace" => common.trace = common.trace || value == "true",
                "input" | "order" | "alpha-bar" | "estimator" | "policy" | "missing"
                | "out-dir" => {}
                _ => extra.push((key.to_string(), value)),
            }
        }
    }

    let input = common
        .input
        .ok_or_else(|| Error::Argument("--input is required".into()))?;
    let order: Vec<String> = match (common.order, need_order) {
        (Some(text), _) => text.split(',').map(|s| s.trim().to_string()).collect(),
        (None, false) => Vec::new(),
        (None, true) => return Err(Error::Argument("--order is required".into())),
    };
    let bytes = fs::read(&input)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", input.display())))?;
    let data = load_dataset(&bytes[..], None)?;

    let estimator = match common.estimator.as_deref() {
        Some(s) => Estimator::parse(s)?,
        None => Estimator::default(),
    };
    let policy = match common.policy.as_deref() {
        None | Some("same-labels") => HyperstagePolicy::SameLabels,
        Some("same-variable") => HyperstagePolicy::SameVariable,
        Some(other) => {
            return Err(Error::Argument(format!(
                "unknown policy '{other}' (expected same-labels|same-variable)"
            )))
        }
    };
    let missing_mode = match common.missing.as_deref() {
        None | Some("prefix") => MissingMode::PrefixCount,
        Some("complete-case") => MissingMode::CompleteCase,
        Some(other) => {
            return Err(Error::Argument(format!(
                "unknown missing mode '{other}' (expected prefix|complete-case)"
            )))
        }
    };
    Ok(Resolved {
        data,
        order,
        fit: FitConfig {
            alpha_bar: common.alpha_bar,
            estimator,
            policy,
            missing_mode,
        },
        out_dir: common.out_dir.unwrap_or_else(|| PathBuf::from(".")),
        trace: common.trace,
        extra,
    })
}

fn trace_text(trace: &SelectionTrace) -> String {
    let mut out = format!("initial score\t{:.6}\n", trace.initial_score);
    for step in &trace.steps {
        out.push_str(&format!(
            "merge\t{}\t{}\t{:.6}\t{:.6}\n",
            step.pair.0, step.pair.1, step.log_bayes_factor, step.cumulative_score
        ));
    }
    out.push_str(&format!("final score\t{:.6}\n", trace.final_score));
    out
}

/// One row per stage: id, members, labels, posterior vector, sample size,
/// prior-only flag.
fn stages_table(st: &StagedTree) -> String {
    let mut out = String::from("stage\tmembers\tlabels\tprobabilities\tsample_size\tprior_only\n");
    let probs = st.probabilities.as_ref();
    for (i, b) in st.staging.blocks().iter().enumerate() {
        let data = StageData::gather(&st.tree, &st.prior, &b.members);
        let members: Vec<String> = b.members.iter().map(|s| format!("s{s}")).collect();
        let vector: Vec<String> = match probs {
            Some(p) => p
                .probabilities(b.members[0])
                .iter()
                .map(|x| format!("{x:.6}"))
                .collect(),
            None => Vec::new(),
        };
        let prior_only = probs.map(|p| p.prior_only(b.members[0])).unwrap_or(false);
        out.push_str(&format!(
            "{i}\t{}\t{}\t{}\t{}\t{}\n",
            members.join(","),
            data.labels.join(","),
            vector.join(","),
            data.sample_size(),
            prior_only
        ));
    }
    out
}

fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<(), Error> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::State(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, content)
        .map_err(|e| Error::State(format!("cannot write {}: {e}", path.display())))?;
    println!("{}", path.display());
    Ok(())
}

fn write_fit(dir: &Path, fit: &FitResult, trace: bool) -> Result<(), Error> {
    write_artifact(dir, "ceg.dot", &ceg_to_dot(&fit.staged_tree, &fit.ceg))?;
    write_artifact(dir, "tree.dot", &staged_tree_to_dot(&fit.staged_tree))?;
    write_artifact(dir, "ceg.json", &ceg_to_json(&fit.staged_tree, &fit.ceg)?)?;
    write_artifact(dir, "stages.tsv", &stages_table(&fit.staged_tree))?;
    if trace {
        write_artifact(dir, "trace.txt", &trace_text(&fit.trace))?;
    }
    Ok(())
}

fn parse_margins(margins: &[String]) -> Result<Vec<MarginSpec>, Error> {
    margins
        .iter()
        .map(|m| MarginSpec::new(m.split(',').map(|s| s.trim().to_string()).collect()))
        .collect()
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Fit(common) => {
            let r = resolve(common)?;
            let fit = fit_full(&r.data, &r.order, &r.fit)?;
            write_fit(&r.out_dir, &fit, r.trace)
        }
        Command::Markov {
            common,
            mut template,
            mut t,
            mut with_z,
            mut dag,
        } => {
            let r = resolve(common)?;
            for (key, value) in &r.extra {
                match key.as_str() {
                    "template" if template.is_none() => template = Some(value.clone()),
                    "slices" if t.is_none() => {
                        t = Some(value.parse().map_err(|_| {
                            Error::Parse("config: bad slices value".into())
                        })?)
                    }
                    "with-z" => with_z = with_z || value == "true",
                    "dag" if dag.is_none() => dag = Some(PathBuf::from(value)),
                    _ => {}
                }
            }
            let assumptions = match (template, dag) {
                (Some(name), None) => {
                    let kind = TemplateKind::parse(&name)?;
                    let t = t.ok_or_else(|| {
                        Error::Argument("--slices is required with --template".into())
                    })?;
                    dag_template(kind, t, with_z)?
                }
                (None, Some(path)) => {
                    let text = fs::read_to_string(&path).map_err(|e| {
                        Error::Parse(format!("cannot read {}: {e}", path.display()))
                    })?;
                    DagAssumptions::from_edge_list(r.order.clone(), &text)?
                }
                _ => {
                    return Err(Error::Argument(
                        "provide exactly one of --template or --dag".into(),
                    ))
                }
            };
            let fit = fit_with_markov_assumptions(&r.data, &r.order, &assumptions, &r.fit)?;
            write_fit(&r.out_dir, &fit, r.trace)
        }
        Command::Marginal { common, mut margins } => {
            let r = resolve_with(common, false)?;
            if margins.is_empty() {
                margins = r
                    .extra
                    .iter()
                    .filter(|(k, _)| k == "margin")
                    .map(|(_, v)| v.clone())
                    .collect();
            }
            if margins.is_empty() {
                return Err(Error::Argument("at least one --margin is required".into()));
            }
            let specs = parse_margins(&margins)?;
            let fits = fit_marginal_sequence(&r.data, &specs, &r.fit)?;
            for (i, fit) in fits.iter().enumerate() {
                write_fit(&r.out_dir.join(format!("margin_{i}")), fit, r.trace)?;
            }
            Ok(())
        }
        Command::Export { common, format } => {
            let r = resolve(common)?;
            let fit = fit_full(&r.data, &r.order, &r.fit)?;
            let text = match format.as_str() {
                "graph" => ceg_to_dot(&fit.staged_tree, &fit.ceg),
                "json" => ceg_to_json(&fit.staged_tree, &fit.ceg)?,
                other => {
                    return Err(Error::Argument(format!(
                        "unknown format '{other}' (expected graph|json)"
                    )))
                }
            };
            print!("{text}");
            Ok(())
        }
        Command::Oracle { common, max_class_size } => {
            let r = resolve(common)?;
            let tree = EventTree::build(&r.data, &r.order, r.fit.missing_mode)?;
            let alpha_bar = r.fit.alpha_bar.unwrap_or_else(|| tree.max_out_degree() as f64);
            let prior = assign_mass_conserving_prior(&tree, alpha_bar)?;
            let hyper = default_hyperstage(&tree, r.fit.policy);
            let staging = exhaustive_select(&tree, &prior, &hyper, max_class_size)?;
            let st = StagedTree::new(tree, staging, prior)?
                .with_probabilities(r.fit.estimator)?;
            let score = st.log_score()?;
            let ceg = build_ceg(&st)?;
            write_artifact(&r.out_dir, "ceg.dot", &ceg_to_dot(&st, &ceg))?;
            write_artifact(&r.out_dir, "ceg.json", &ceg_to_json(&st, &ceg)?)?;
            write_artifact(&r.out_dir, "stages.tsv", &stages_table(&st))?;
            println!("log score {score:.6}");
            Ok(())
        }
        Command::Diff { common, margins } => {
            let r = resolve_with(common, false)?;
            if margins.len() != 2 {
                return Err(Error::Argument("diff needs exactly two --margin flags".into()));
            }
            let specs = parse_margins(&margins)?;
            let fits = fit_marginal_sequence(&r.data, &specs, &r.fit)?;
            let diff = compare_stagings(&fits[0].staged_tree, &fits[1].staged_tree)?;
            println!("agreement {:.6}", diff.agreement);
            for (depth, members) in &diff.only_in_a {
                let m: Vec<String> = members.iter().map(|s| format!("s{s}")).collect();
                println!("only in {}: depth {} block {}", margins[0], depth, m.join(","));
            }
            for (depth, members) in &diff.only_in_b {
                let m: Vec<String> = members.iter().map(|s| format!("s{s}")).collect();
                println!("only in {}: depth {} block {}", margins[1], depth, m.join(","));
            }
            if diff.is_empty() {
                println!("stagings identical");
            }
            Ok(())
        }
    }
}
