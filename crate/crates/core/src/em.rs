//! Expectation-maximization over a set of observations.
//!
//! Each step aggregates expected production counts across observations and
//! renormalizes them per parent. The log-likelihood recorded for a step is
//! that of the model going *into* the step, so the trace is exactly the
//! sequence EM promises never to decrease.

use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::inside_outside::{
    aggregate_counts, inner_probabilities, observation_counts, CountingMode, ExpectedCounts,
    InsideOutsideError,
};
use crate::model::OffspringModel;
use crate::numfmt::sig17;
use crate::observation::Observation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ImpossiblePolicy {
    /// Fail if any observation has zero likelihood under the initial model.
    #[default]
    Abort,
    /// Drop such observations with a warning and fit the rest.
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub mode: CountingMode,
    pub tol_loglik: f64,
    /// Bound on the largest absolute parameter change.
    pub tol_param: f64,
    pub max_iter: usize,
    pub on_impossible: ImpossiblePolicy,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            mode: CountingMode::Multiset,
            tol_loglik: 1e-8,
            tol_param: 1e-8,
            max_iter: 200,
            on_impossible: ImpossiblePolicy::Abort,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no observations to fit")]
    NoObservations,
    #[error("observations with zero likelihood under the initial model (rows {rows:?})")]
    Underivable { rows: Vec<usize> },
    #[error("every observation has zero likelihood under the initial model")]
    NothingDerivable,
    #[error(transparent)]
    InsideOutside(#[from] InsideOutsideError),
}

/// One EM iteration, recorded before its update is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    /// One-based.
    pub iteration: usize,
    /// Total log-likelihood of `probabilities`.
    pub log_likelihood: f64,
    pub probabilities: Vec<f64>,
    /// Parents with zero expected occurrences, whose distribution was carried over.
    pub kept_parents: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmResult {
    pub model: OffspringModel,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub iterations: usize,
    /// Zero-based indices into the input, dropped under [`ImpossiblePolicy::Skip`].
    pub skipped_observations: Vec<usize>,
    /// Total log-likelihood of `model`.
    pub log_likelihood: f64,
}

fn e_step(
    model: &OffspringModel,
    observations: &[Observation],
    mode: CountingMode,
) -> Result<ExpectedCounts, InsideOutsideError> {
    let per: Vec<ExpectedCounts> = observations
        .par_iter()
        .map(|obs| observation_counts(model, obs, mode))
        .collect::<Result<_, _>>()?;
    Ok(aggregate_counts(&per))
}

fn m_step(model: &OffspringModel, counts: &ExpectedCounts) -> (OffspringModel, Vec<usize>) {
    let structure = model.structure();
    let mut probs = model.probabilities().to_vec();
    let mut kept = Vec::new();
    for v in 0..model.types().num_nonterminals() {
        let range = structure.rules_of(v);
        let denom: f64 = counts.production_expectations[range.clone()].iter().sum();
        if denom > 0.0 {
            for i in range {
                probs[i] = counts.production_expectations[i] / denom;
            }
        } else {
            log::warn!(
                "type {} has no expected occurrences; keeping its distribution",
                model.types().name(v)
            );
            kept.push(v);
        }
    }
    let next = OffspringModel::new(std::sync::Arc::clone(structure), probs)
        .expect("normalized expected counts form a distribution");
    (next, kept)
}

fn step(
    model: &OffspringModel,
    observations: &[Observation],
    mode: CountingMode,
) -> Result<(OffspringModel, f64, Vec<usize>), InsideOutsideError> {
    let counts = e_step(model, observations, mode)?;
    let (next, kept) = m_step(model, &counts);
    Ok((next, counts.log_likelihood, kept))
}

/// One update; the log-likelihood is that of the input model.
pub fn em_step(
    model: &OffspringModel,
    observations: &[Observation],
    mode: CountingMode,
) -> Result<(OffspringModel, f64), InsideOutsideError> {
    step(model, observations, mode).map(|(next, ll, _)| (next, ll))
}

/// Total log-likelihood of `observations`; `-inf` if any is underivable.
pub fn log_likelihood(
    model: &OffspringModel,
    observations: &[Observation],
    mode: CountingMode,
) -> Result<f64, InsideOutsideError> {
    let lls: Vec<f64> = observations
        .par_iter()
        .map(|obs| inner_probabilities(model, obs, mode).map(|t| t.likelihood().ln()))
        .collect::<Result<_, _>>()?;
    Ok(lls.iter().sum())
}

/// Iterates [`em_step`] until both the parameter change and the resulting
/// log-likelihood gain fall below their tolerances, or `max_iter` steps run.
pub fn fit(
    init: &OffspringModel,
    observations: &[Observation],
    cfg: &EmConfig,
) -> Result<EmResult, EmError> {
    if !(cfg.tol_loglik > 0.0 && cfg.tol_param > 0.0) {
        return Err(EmError::InvalidConfig("tolerances must be positive".into()));
    }
    if cfg.max_iter == 0 {
        return Err(EmError::InvalidConfig("max_iter must be at least 1".into()));
    }
    if observations.is_empty() {
        return Err(EmError::NoObservations);
    }
    let likelihoods: Vec<f64> = observations
        .par_iter()
        .map(|obs| inner_probabilities(init, obs, cfg.mode).map(|t| t.likelihood()))
        .collect::<Result<_, _>>()?;
    let bad: Vec<usize> = (0..observations.len())
        .filter(|&i| !(likelihoods[i] > 0.0))
        .collect();
    if !bad.is_empty() && cfg.on_impossible == ImpossiblePolicy::Abort {
        return Err(EmError::Underivable { rows: bad });
    }
    for &i in &bad {
        log::warn!("skipping observation {i}: zero likelihood under the initial model");
    }
    let kept: Vec<Observation> = (0..observations.len())
        .filter(|i| !bad.contains(i))
        .map(|i| observations[i].clone())
        .collect();
    if kept.is_empty() {
        return Err(EmError::NothingDerivable);
    }

    let mut current = init.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut final_ll = None;
    for k in 1..=cfg.max_iter {
        let (next, ll_in, kept_parents) = step(&current, &kept, cfg.mode)?;
        let delta = next.max_abs_diff(&current);
        trace.push(TraceEntry {
            iteration: k,
            log_likelihood: ll_in,
            probabilities: current.probabilities().to_vec(),
            kept_parents,
        });
        if delta < cfg.tol_param {
            let ll_next = log_likelihood(&next, &kept, cfg.mode)?;
            current = next;
            if ll_next - ll_in < cfg.tol_loglik {
                converged = true;
                final_ll = Some(ll_next);
                break;
            }
        } else {
            current = next;
        }
    }
    let log_likelihood = match final_ll {
        Some(ll) => ll,
        None => log_likelihood(&current, &kept, cfg.mode)?,
    };
    Ok(EmResult {
        model: current,
        iterations: trace.len(),
        trace,
        converged,
        skipped_observations: bad,
        log_likelihood,
    })
}

/// TSV with one row per iteration: `iter loglik <rule labels...>`.
pub fn trace_tsv(result: &EmResult) -> String {
    let structure = result.model.structure();
    let types = structure.types();
    let mut out = String::from("iter\tloglik");
    for rule in structure.rules() {
        out.push('\t');
        out.push_str(&rule.label(types));
    }
    out.push('\n');
    for entry in &result.trace {
        let _ = write!(out, "{}\t{}", entry.iteration, sig17(entry.log_likelihood));
        for &p in &entry.probabilities {
            let _ = write!(out, "\t{}", sig17(p));
        }
        out.push('\n');
    }
    out
}
