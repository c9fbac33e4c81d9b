//! Causal workflow: choose or validate an adjustment set from the DAG, fit
//! the outcome on the exposure plus that set, and report a single total
//! causal effect. The remaining coefficients are kept but labelled as not
//! causally interpretable.

mod independence;
mod report;

use thiserror::Error;

use crate::dag::{AdjustmentVerdict, Condition, Dag, DagError};
use crate::glm::{fit, Column, Dataset, Family, GlmError, ModelSpec, Term};

pub use independence::{test_implied_independencies, IndependenceTestResult};
pub use report::{Coefficient, Effect, EffectReport, CAUSAL_LABEL, NON_CAUSAL_LABEL};

/// Two-sided 95% normal quantile used for Wald intervals.
pub const Z_95: f64 = 1.959963984540054;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CausalError {
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error("no valid adjustment set exists; these paths cannot be handled by adjustment: {}", .paths.join("; "))]
    NoValidSet { paths: Vec<String> },
    #[error("{}", invalid_override_message(.set, .verdict))]
    InvalidOverride {
        set: Vec<String>,
        verdict: Box<AdjustmentVerdict>,
    },
    #[error("DAG nodes missing from the data: {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("exposure {0} must be a numeric column")]
    CategoricalExposure(String),
    #[error("column {0} must be numeric for independence testing")]
    NotNumeric(String),
    #[error("{n} rows leave no degrees of freedom for a conditioning set of size {k} (need n > k + 3)")]
    InsufficientDf { n: usize, k: usize },
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("invalid effect report: {0}")]
    InvalidReport(String),
}

fn invalid_override_message(set: &[String], verdict: &AdjustmentVerdict) -> String {
    let mut msg = format!("adjustment set {{{}}} is not valid:", set.join(", "));
    for o in &verdict.offending_paths {
        msg.push_str(&format!(" {} fails, path {};", o.condition, o.path));
    }
    msg.pop();
    msg
}

impl CausalError {
    /// The first failed condition of an invalid override.
    pub fn failed_condition(&self) -> Option<Condition> {
        match self {
            CausalError::InvalidOverride { verdict, .. } => {
                verdict.offending_paths.first().map(|o| o.condition)
            }
            _ => None,
        }
    }
}

/// The adjustment set that [`estimate_total_effect`] would use without an
/// override: the first minimal set whose variables are all columns of
/// `data`.
pub fn default_adjustment_set(dag: &Dag, data: &Dataset) -> Result<Vec<String>, CausalError> {
    let sets = dag.minimal_adjustment_sets()?;
    if sets.is_empty() {
        let canonical = dag.canonical_adjustment_set()?;
        let verdict = dag.check_adjustment(&canonical)?;
        return Err(CausalError::NoValidSet {
            paths: verdict
                .offending_paths
                .iter()
                .map(|o| format!("{} ({})", o.path, o.condition))
                .collect(),
        });
    }
    if let Some(s) = sets.iter().find(|s| s.iter().all(|v| data.has_column(v))) {
        return Ok(s.clone());
    }
    let mut missing: Vec<String> = sets[0]
        .iter()
        .filter(|v| !data.has_column(v))
        .cloned()
        .collect();
    missing.sort();
    Err(CausalError::MissingColumns(missing))
}

/// Estimates the total causal effect of the DAG's exposure on its outcome.
///
/// With `set_override`, the set must pass the adjustment check; an invalid
/// set is refused before any model is fitted.
pub fn estimate_total_effect(
    dag: &Dag,
    data: &Dataset,
    family: Family,
    set_override: Option<&[String]>,
) -> Result<EffectReport, CausalError> {
    let exposure = dag.exposure().ok_or(DagError::MissingAnnotation("exposure"))?;
    let outcome = dag.outcome().ok_or(DagError::MissingAnnotation("outcome"))?;

    let mut warnings = Vec::new();
    let mut set: Vec<String> = match set_override {
        Some(s) => {
            let verdict = dag.check_adjustment(s)?;
            if !verdict.valid {
                let mut set = s.to_vec();
                set.sort();
                return Err(CausalError::InvalidOverride {
                    set,
                    verdict: Box::new(verdict),
                });
            }
            s.to_vec()
        }
        None => {
            let n_sets = dag.minimal_adjustment_sets()?.len();
            let chosen = default_adjustment_set(dag, data)?;
            if n_sets > 1 {
                warnings.push(format!(
                    "{n_sets} minimal adjustment sets exist; using {{{}}}",
                    chosen.join(", ")
                ));
            }
            chosen
        }
    };
    set.sort();
    set.dedup();

    let mut missing: Vec<String> = std::iter::once(exposure)
        .chain(std::iter::once(outcome))
        .chain(set.iter().map(String::as_str))
        .filter(|v| !data.has_column(v))
        .map(str::to_string)
        .collect();
    if !missing.is_empty() {
        missing.sort();
        return Err(CausalError::MissingColumns(missing));
    }
    if let Column::Categorical { .. } = data.column(exposure)? {
        return Err(CausalError::CategoricalExposure(exposure.to_string()));
    }

    let terms = std::iter::once(Term::new(exposure))
        .chain(set.iter().map(Term::new))
        .collect();
    let model = fit(data, &ModelSpec::new(outcome, terms, family))?;
    let se = model.std_errors().ok_or(GlmError::InsufficientRows {
        n: model.n,
        p: model.p,
    })?;
    warnings.extend(model.warnings.iter().cloned());

    // Column 0 is the intercept, column 1 the exposure.
    let estimate = model.coefficients[1];
    let effect = Effect {
        estimate,
        se: se[1],
        ci_low: estimate - Z_95 * se[1],
        ci_high: estimate + Z_95 * se[1],
        scale: family.coefficient_scale().to_string(),
        label: CAUSAL_LABEL.to_string(),
    };
    let non_causal = model
        .columns
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != 1)
        .map(|(j, name)| {
            (
                name.clone(),
                Coefficient {
                    estimate: model.coefficients[j],
                    se: se[j],
                    label: NON_CAUSAL_LABEL.to_string(),
                },
            )
        })
        .collect();

    Ok(EffectReport {
        exposure: exposure.to_string(),
        outcome: outcome.to_string(),
        effect,
        adjustment_set: set,
        non_causal_coefficients: non_causal,
        family,
        dag_fingerprint: dag.fingerprint(),
        warnings,
    })
}
