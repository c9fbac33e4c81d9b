use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::PredictError;
use crate::glm::{fit, Dataset, Family, FittedGlm, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Rmse,
    Auc,
    AdjustedR2,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Rmse => "rmse",
            Metric::Auc => "auc",
            Metric::AdjustedR2 => "adjusted-r2",
        }
    }

    fn check_family(self, family: Family) -> Result<(), PredictError> {
        match (self, family) {
            (Metric::Auc, f) if f != Family::Binomial => Err(PredictError::MetricFamily {
                metric: self,
                family: "binomial",
            }),
            (Metric::AdjustedR2, f) if f != Family::Gaussian => Err(PredictError::MetricFamily {
                metric: self,
                family: "gaussian",
            }),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rmse" => Ok(Metric::Rmse),
            "auc" => Ok(Metric::Auc),
            "adjusted-r2" | "adj-r2" => Ok(Metric::AdjustedR2),
            other => Err(format!("unknown metric '{other}'")),
        }
    }
}

/// Where an evaluation was computed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EvalSource {
    Training,
    CrossValidation { k: usize, seed: u64 },
    HeldOut { id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: Metric,
    pub value: f64,
    pub source: EvalSource,
    /// Per-fold values for cross-validation.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub folds: Vec<f64>,
}

/// Root mean squared difference.
pub fn rmse(predictions: &[f64], observations: &[f64]) -> Result<f64, PredictError> {
    if predictions.len() != observations.len() {
        return Err(PredictError::LengthMismatch(predictions.len(), observations.len()));
    }
    if predictions.is_empty() {
        return Err(PredictError::Empty);
    }
    let ss: f64 = predictions
        .iter()
        .zip(observations)
        .map(|(p, o)| (p - o) * (p - o))
        .sum();
    Ok((ss / predictions.len() as f64).sqrt())
}

/// Area under the ROC curve via the Mann-Whitney statistic on midranks, so
/// tied scores count one half.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Result<f64, PredictError> {
    if scores.len() != labels.len() {
        return Err(PredictError::LengthMismatch(scores.len(), labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l != 0.0 && l != 1.0) {
        return Err(PredictError::NonBinaryLabel(bad));
    }
    let n1 = labels.iter().filter(|&&l| l == 1.0).count();
    let n0 = labels.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(PredictError::SingleClass(format!(
            "{n1} positives and {n0} negatives"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; ties share the mean rank.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += order[i..=j].iter().filter(|&&k| labels[k] == 1.0).count() as f64 * mid;
        i = j + 1;
    }
    let (n1, n0) = (n1 as f64, n0 as f64);
    Ok((rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0))
}

/// Shuffles `0..n` with ChaCha20 seeded by `seed` and cuts it into `k`
/// contiguous folds whose sizes differ by at most one.
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, PredictError> {
    if k < 2 || k > n {
        return Err(PredictError::InvalidFolds { k, n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

fn metric_value(
    fit: &FittedGlm,
    data: &Dataset,
    metric: Metric,
) -> Result<f64, PredictError> {
    match metric {
        Metric::AdjustedR2 => Ok(fit.adjusted_r2()?),
        Metric::Rmse | Metric::Auc => {
            let pred = fit.predict(data)?;
            let obs = data.numeric(&fit.outcome)?;
            let pred = pred.as_slice().expect("contiguous");
            match metric {
                Metric::Rmse => rmse(pred, obs),
                _ => roc_auc(pred, obs),
            }
        }
    }
}

/// Evaluates a fitted model on `data`: the training data or a held-out set.
/// Adjusted R² is a property of the fit and ignores `data`.
pub fn evaluate(
    fit: &FittedGlm,
    data: &Dataset,
    metric: Metric,
    source: EvalSource,
) -> Result<EvalReport, PredictError> {
    metric.check_family(fit.family)?;
    Ok(EvalReport {
        metric,
        value: metric_value(fit, data, metric)?,
        source,
        folds: vec![],
    })
}

/// k-fold cross-validation of `spec`: fit on k-1 folds, score the held-out
/// fold, and report the mean over folds.
pub fn cross_validate(
    data: &Dataset,
    spec: &ModelSpec,
    k: usize,
    seed: u64,
    metric: Metric,
) -> Result<EvalReport, PredictError> {
    metric.check_family(spec.family)?;
    if metric == Metric::AdjustedR2 {
        return Err(PredictError::MetricNotCrossValidated(metric));
    }
    let folds = fold_indices(data.n_rows(), k, seed)?;
    let mut values = Vec::with_capacity(k);
    for (f, test) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, rows)| rows.iter().copied())
            .collect();
        let model = fit(&data.take_rows(&train), spec)?;
        let held_out = data.take_rows(test);
        let v = metric_value(&model, &held_out, metric).map_err(|e| match e {
            PredictError::SingleClass(m) => PredictError::SingleClass(format!("fold {}: {m}", f + 1)),
            other => other,
        })?;
        values.push(v);
    }
    Ok(EvalReport {
        metric,
        value: values.iter().sum::<f64>() / k as f64,
        source: EvalSource::CrossValidation { k, seed },
        folds: values,
    })
}
