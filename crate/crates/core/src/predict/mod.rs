//! Prediction workflow: automatic covariate selection, the LASSO path, and
//! predictive evaluation by held-out data or k-fold cross-validation.

mod eval;
mod lasso;
mod select;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::glm::{FittedGlm, GlmError, ModelSpec};

pub use eval::{
    cross_validate, evaluate, fold_indices, rmse, roc_auc, EvalReport, EvalSource, Metric,
};
pub use lasso::{
    lasso_cv, lasso_path, lasso_select, lasso_then_backward, soft_threshold, LassoCv, LassoOptions,
    LassoPath, LassoProblem, LambdaRule,
};
pub use select::{best_subsets, stepwise, Direction, MAX_SUBSET_CANDIDATES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error("best subsets is limited to {max} candidates, got {got}")]
    TooManyCandidates { got: usize, max: usize },
    #[error("{0} supports the gaussian family only")]
    GaussianOnly(&'static str),
    #[error("number of folds must lie in [2, {n}], got {k}")]
    InvalidFolds { k: usize, n: usize },
    #[error("metric {metric} requires the {family} family")]
    MetricFamily { metric: Metric, family: &'static str },
    #[error("metric {0} is not available under cross-validation")]
    MetricNotCrossValidated(Metric),
    #[error("AUC needs both outcome classes; {0}")]
    SingleClass(String),
    #[error("labels must be 0 or 1, found {0}")]
    NonBinaryLabel(f64),
    #[error("length mismatch: {0} predictions vs {1} observations")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("lambda grid must be non-empty, non-negative and decreasing")]
    InvalidLambdas,
}

/// Information criterion minimised during selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
        }
    }

    pub fn of(self, fit: &FittedGlm) -> f64 {
        match self {
            Criterion::Aic => fit.aic(),
            Criterion::Bic => fit.bic(),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            other => Err(format!("unknown criterion '{other}' (expected aic or bic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    BestSubsets,
    Forward,
    Backward,
    Lasso,
    LassoBackward,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::BestSubsets => "best-subsets",
            Method::Forward => "forward",
            Method::Backward => "backward",
            Method::Lasso => "lasso",
            Method::LassoBackward => "lasso-backward",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "best-subsets" | "best" | "subsets" => Ok(Method::BestSubsets),
            "forward" => Ok(Method::Forward),
            "backward" => Ok(Method::Backward),
            "lasso" => Ok(Method::Lasso),
            "lasso-backward" => Ok(Method::LassoBackward),
            other => Err(format!("unknown selection method '{other}'")),
        }
    }
}

/// One evaluated candidate model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Search phase, e.g. `subsets`, `forward step 2`, `lasso`.
    pub stage: String,
    /// Term labels of the candidate.
    pub terms: Vec<String>,
    /// Criterion value, or mean CV RMSE for LASSO entries; absent when the
    /// fit failed.
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub method: Method,
    /// `aic`, `bic` or `cv-rmse`.
    pub criterion: String,
    pub value: f64,
    pub chosen: ModelSpec,
    pub trace: Vec<TraceEntry>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lasso: Option<LassoCv>,
}

impl SelectionResult {
    pub fn chosen_labels(&self) -> Vec<String> {
        self.chosen.term_labels()
    }
}
