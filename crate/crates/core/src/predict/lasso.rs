//! L1-penalised least squares by cyclic coordinate descent.
//!
//! Covariates are standardised to mean zero and unit variance (divisor `n`)
//! and the response is centred, so the intercept is never penalised. The
//! objective at penalty `lambda` is
//! `(1/2n) * ||y - X b||^2 + lambda * sum_j |b_j|`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::eval::fold_indices;
use super::select::{stepwise, Direction};
use super::{Criterion, Method, PredictError, SelectionResult, TraceEntry};
use crate::glm::{build_design, fit, Dataset, Family, GlmError, ModelSpec, Term};

/// Coordinate descent stops when no coefficient moves more than this.
pub const LASSO_TOLERANCE: f64 = 1e-7;
const MAX_SWEEPS: usize = 100_000;
pub const GRID_LENGTH: usize = 100;
pub const GRID_RATIO: f64 = 1e-3;

/// `sign(z) * max(|z| - gamma, 0)`
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// A standardised LASSO problem.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    /// Standardised covariates (no intercept column).
    pub x: Array2<f64>,
    /// Centred response.
    pub y: Array1<f64>,
    pub means: Array1<f64>,
    pub scales: Array1<f64>,
    pub y_mean: f64,
    col_sq: Array1<f64>,
}

impl LassoProblem {
    /// Standardises `x` (covariates only) and centres `y`. `names` label the
    /// columns in the zero-variance error.
    pub fn new(
        x: ArrayView2<'_, f64>,
        y: ArrayView1<'_, f64>,
        names: &[String],
    ) -> Result<Self, PredictError> {
        let (n, p) = x.dim();
        if y.len() != n {
            return Err(PredictError::LengthMismatch(n, y.len()));
        }
        if n < 2 {
            return Err(GlmError::InsufficientRows { n, p: 2 }.into());
        }
        let nf = n as f64;
        let means = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(p));
        let mut xs = &x - &means.view().insert_axis(Axis(0));
        let scales: Array1<f64> = xs
            .axis_iter(Axis(1))
            .map(|c| (c.dot(&c) / nf).sqrt())
            .collect();
        for (j, &sd) in scales.iter().enumerate() {
            if !(sd > 1e-12 * (1.0 + means[j].abs())) {
                return Err(GlmError::ZeroVariance(names[j].clone()).into());
            }
        }
        xs /= &scales.view().insert_axis(Axis(0));
        let y_mean = y.mean().unwrap_or(0.0);
        let col_sq = xs.axis_iter(Axis(1)).map(|c| c.dot(&c) / nf).collect();
        Ok(Self {
            x: xs,
            y: y.mapv(|v| v - y_mean),
            means,
            scales,
            y_mean,
            col_sq,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Smallest penalty at which every coefficient is zero.
    pub fn lambda_max(&self) -> f64 {
        let n = self.n() as f64;
        self.x
            .t()
            .dot(&self.y)
            .iter()
            .fold(0.0, |m, &c| f64::max(m, c.abs() / n))
    }

    /// `len` log-spaced values from `lambda_max` down to
    /// `ratio * lambda_max`.
    pub fn auto_grid(&self, len: usize, ratio: f64) -> Vec<f64> {
        let hi = self.lambda_max();
        if len == 1 {
            return vec![hi];
        }
        let (lhi, llo) = (hi.ln(), (hi * ratio).ln());
        (0..len)
            .map(|i| {
                if i == 0 {
                    hi
                } else {
                    (lhi + (llo - lhi) * i as f64 / (len - 1) as f64).exp()
                }
            })
            .collect()
    }

    fn residual(&self, beta: &Array1<f64>) -> Array1<f64> {
        &self.y - &self.x.dot(beta)
    }

    pub fn objective(&self, beta: &Array1<f64>, lambda: f64) -> f64 {
        let r = self.residual(beta);
        r.dot(&r) / (2.0 * self.n() as f64) + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    /// `<x_j, r> / n` for every covariate, the quantity in the optimality
    /// conditions.
    pub fn correlations(&self, beta: &Array1<f64>) -> Array1<f64> {
        self.x.t().dot(&self.residual(beta)) / self.n() as f64
    }

    /// Runs coordinate descent from `beta` in place. Records the objective
    /// after each sweep when `trace` is given. Returns the sweep count.
    pub fn solve(&self, lambda: f64, beta: &mut Array1<f64>, mut trace: Option<&mut Vec<f64>>) -> usize {
        let n = self.n() as f64;
        let mut r = self.residual(beta);
        for sweep in 1..=MAX_SWEEPS {
            let mut max_change: f64 = 0.0;
            for j in 0..self.p() {
                let xj = self.x.column(j);
                let old = beta[j];
                let rho = xj.dot(&r) / n + self.col_sq[j] * old;
                let new = soft_threshold(rho, lambda) / self.col_sq[j];
                if new != old {
                    r.scaled_add(old - new, &xj);
                    beta[j] = new;
                    max_change = max_change.max((new - old).abs());
                }
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.objective(beta, lambda));
            }
            if max_change < LASSO_TOLERANCE {
                return sweep;
            }
        }
        MAX_SWEEPS
    }

    /// Intercept and slopes on the original covariate scale.
    pub fn to_original(&self, beta: &Array1<f64>) -> (f64, Array1<f64>) {
        let slopes = beta / &self.scales;
        (self.y_mean - slopes.dot(&self.means), slopes)
    }

    /// Predictions for raw (unstandardised) covariate rows.
    pub fn predict(&self, x: ArrayView2<'_, f64>, beta: &Array1<f64>) -> Array1<f64> {
        let (b0, slopes) = self.to_original(beta);
        x.dot(&slopes) + b0
    }

    /// Solutions along a decreasing grid, each warm-started from the last.
    pub fn path(&self, lambdas: &[f64]) -> (Vec<Array1<f64>>, Vec<usize>) {
        let mut beta = Array1::zeros(self.p());
        let mut sols = Vec::with_capacity(lambdas.len());
        let mut sweeps = Vec::with_capacity(lambdas.len());
        for &l in lambdas {
            sweeps.push(self.solve(l, &mut beta, None));
            sols.push(beta.clone());
        }
        (sols, sweeps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoPath {
    /// Design column names, excluding the intercept.
    pub columns: Vec<String>,
    /// Decreasing penalties.
    pub lambdas: Vec<f64>,
    pub standardized: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    /// Slopes on the original covariate scale.
    pub coefficients: Vec<Vec<f64>>,
    /// Non-zero columns at each penalty.
    pub active: Vec<Vec<String>>,
    pub sweeps: Vec<usize>,
}

struct Prepared {
    problem: LassoProblem,
    x_raw: Array2<f64>,
    y: Array1<f64>,
    columns: Vec<String>,
    /// Index of the candidate term that produced each design column.
    term_of_column: Vec<usize>,
}

fn prepare(
    data: &Dataset,
    outcome: &str,
    candidates: &[Term],
    family: Family,
) -> Result<Prepared, PredictError> {
    if family != Family::Gaussian {
        return Err(PredictError::GaussianOnly("LASSO"));
    }
    let design = build_design(data, &ModelSpec::new(outcome, candidates.to_vec(), family))?;
    let x_raw = design.x.slice(s![.., 1..]).to_owned();
    let columns = design.columns[1..].to_vec();
    let term_of_column = design
        .layout
        .encoders
        .iter()
        .enumerate()
        .flat_map(|(t, enc)| std::iter::repeat_n(t, enc.column_names().len()))
        .collect();
    let problem = LassoProblem::new(x_raw.view(), design.y.view(), &columns)?;
    Ok(Prepared {
        problem,
        x_raw,
        y: design.y,
        columns,
        term_of_column,
    })
}

fn check_grid(lambdas: &[f64]) -> Result<(), PredictError> {
    let ok = !lambdas.is_empty()
        && lambdas.iter().all(|l| l.is_finite() && *l >= 0.0)
        && lambdas.windows(2).all(|w| w[0] >= w[1]);
    if ok {
        Ok(())
    } else {
        Err(PredictError::InvalidLambdas)
    }
}

fn build_path(prep: &Prepared, lambdas: Vec<f64>) -> LassoPath {
    let (sols, sweeps) = prep.problem.path(&lambdas);
    let mut intercepts = Vec::with_capacity(sols.len());
    let mut coefficients = Vec::with_capacity(sols.len());
    let mut active = Vec::with_capacity(sols.len());
    for b in &sols {
        let (b0, slopes) = prep.problem.to_original(b);
        intercepts.push(b0);
        coefficients.push(slopes.to_vec());
        active.push(
            b.iter()
                .zip(&prep.columns)
                .filter(|(v, _)| **v != 0.0)
                .map(|(_, c)| c.clone())
                .collect(),
        );
    }
    LassoPath {
        columns: prep.columns.clone(),
        lambdas,
        standardized: sols.into_iter().map(|b| b.to_vec()).collect(),
        intercepts,
        coefficients,
        active,
        sweeps,
    }
}

/// The LASSO path over `lambdas`, or over the automatic grid of
/// [`GRID_LENGTH`] values from `lambda_max` to `GRID_RATIO * lambda_max`.
pub fn lasso_path(
    data: &Dataset,
    outcome: &str,
    candidates: &[Term],
    family: Family,
    lambdas: Option<&[f64]>,
) -> Result<LassoPath, PredictError> {
    let prep = prepare(data, outcome, candidates, family)?;
    let grid = match lambdas {
        Some(l) => {
            check_grid(l)?;
            l.to_vec()
        }
        None => prep.problem.auto_grid(GRID_LENGTH, GRID_RATIO),
    };
    Ok(build_path(&prep, grid))
}

/// Rule for picking the penalty from cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaRule {
    /// Penalty with the smallest mean CV RMSE.
    #[default]
    Min,
    /// Largest penalty within one standard error of the minimum.
    OneSe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoOptions {
    pub k: usize,
    pub seed: u64,
    pub rule: LambdaRule,
    /// Explicit penalty grid; the automatic grid when absent.
    pub lambdas: Option<Vec<f64>>,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            k: 10,
            seed: 0,
            rule: LambdaRule::Min,
            lambdas: None,
        }
    }
}

/// Cross-validation summary along the penalty grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoCv {
    pub k: usize,
    pub seed: u64,
    pub rule: LambdaRule,
    pub lambdas: Vec<f64>,
    pub cv_rmse: Vec<f64>,
    /// Standard error of the fold RMSEs at each penalty.
    pub cv_se: Vec<f64>,
    pub n_active: Vec<usize>,
    pub selected_index: usize,
    pub selected_lambda: f64,
}

/// k-fold cross-validated RMSE along the grid fitted to the full data.
pub fn lasso_cv(
    data: &Dataset,
    outcome: &str,
    candidates: &[Term],
    family: Family,
    options: &LassoOptions,
) -> Result<(LassoPath, LassoCv), PredictError> {
    let prep = prepare(data, outcome, candidates, family)?;
    let grid = match &options.lambdas {
        Some(l) => {
            check_grid(l)?;
            l.clone()
        }
        None => prep.problem.auto_grid(GRID_LENGTH, GRID_RATIO),
    };
    let path = build_path(&prep, grid.clone());
    let folds = fold_indices(prep.y.len(), options.k, options.seed)?;

    let mut per_fold: Vec<Vec<f64>> = Vec::with_capacity(folds.len());
    for (f, test) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, rows)| rows.iter().copied())
            .collect();
        let problem = LassoProblem::new(
            prep.x_raw.select(Axis(0), &train).view(),
            prep.y.select(Axis(0), &train).view(),
            &prep.columns,
        )?;
        let x_test = prep.x_raw.select(Axis(0), test);
        let y_test = prep.y.select(Axis(0), test);
        let (sols, _) = problem.path(&grid);
        per_fold.push(
            sols.iter()
                .map(|b| {
                    let pred = problem.predict(x_test.view(), b);
                    let d = &pred - &y_test;
                    (d.dot(&d) / d.len() as f64).sqrt()
                })
                .collect(),
        );
    }

    let k = folds.len() as f64;
    let cv_rmse: Vec<f64> = (0..grid.len())
        .map(|i| per_fold.iter().map(|f| f[i]).sum::<f64>() / k)
        .collect();
    let cv_se: Vec<f64> = (0..grid.len())
        .map(|i| {
            let m = cv_rmse[i];
            let var = per_fold.iter().map(|f| (f[i] - m).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        })
        .collect();
    let best = (0..grid.len())
        .min_by(|&a, &b| cv_rmse[a].total_cmp(&cv_rmse[b]))
        .expect("non-empty grid");
    let selected = match options.rule {
        LambdaRule::Min => best,
        LambdaRule::OneSe => {
            let bound = cv_rmse[best] + cv_se[best];
            (0..grid.len()).find(|&i| cv_rmse[i] <= bound).unwrap_or(best)
        }
    };
    let cv = LassoCv {
        k: options.k,
        seed: options.seed,
        rule: options.rule,
        n_active: path.active.iter().map(Vec::len).collect(),
        lambdas: grid,
        cv_rmse,
        cv_se,
        selected_index: selected,
        selected_lambda: path.lambdas[selected],
    };
    Ok((path, cv))
}

fn active_terms(path: &LassoPath, index: usize, term_of_column: &[usize]) -> Vec<usize> {
    let mut terms: Vec<usize> = path.standardized[index]
        .iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, _)| term_of_column[j])
        .collect();
    terms.dedup();
    terms
}

/// Selects the terms active at the cross-validated penalty. A categorical
/// term is kept when any of its indicator columns is active.
pub fn lasso_select(
    data: &Dataset,
    outcome: &str,
    candidates: &[Term],
    family: Family,
    options: &LassoOptions,
) -> Result<SelectionResult, PredictError> {
    let prep = prepare(data, outcome, candidates, family)?;
    let (path, cv) = lasso_cv(data, outcome, candidates, family, options)?;
    let label = |ts: &[usize]| ts.iter().map(|&t| candidates[t].label()).collect();
    let trace = (0..path.lambdas.len())
        .map(|i| TraceEntry {
            stage: "lasso".into(),
            terms: label(&active_terms(&path, i, &prep.term_of_column)),
            value: Some(cv.cv_rmse[i]),
            lambda: Some(path.lambdas[i]),
            error: None,
        })
        .collect();
    let chosen = active_terms(&path, cv.selected_index, &prep.term_of_column);
    let mut warnings = Vec::new();
    if chosen.is_empty() {
        warnings.push(format!(
            "LASSO kept no terms at lambda {}; the intercept-only model is reported",
            cv.selected_lambda
        ));
    }
    Ok(SelectionResult {
        method: Method::Lasso,
        criterion: "cv-rmse".into(),
        value: cv.cv_rmse[cv.selected_index],
        chosen: ModelSpec::new(
            outcome,
            chosen.iter().map(|&t| candidates[t].clone()).collect(),
            family,
        ),
        trace,
        warnings,
        lasso: Some(cv),
    })
}

/// LASSO screening at the cross-validated penalty followed by backward
/// stepwise selection on the surviving terms. Both stages are recorded in
/// the trace.
pub fn lasso_then_backward(
    data: &Dataset,
    outcome: &str,
    candidates: &[Term],
    family: Family,
    criterion: Criterion,
    options: &LassoOptions,
) -> Result<SelectionResult, PredictError> {
    let screen = lasso_select(data, outcome, candidates, family, options)?;
    let mut warnings = screen.warnings;
    let mut trace = screen.trace;
    let (value, chosen) = if screen.chosen.terms.is_empty() {
        let spec = ModelSpec::new(outcome, vec![], family);
        let v = criterion.of(&fit(data, &spec)?);
        trace.push(TraceEntry {
            stage: "start".into(),
            terms: vec![],
            value: Some(v),
            lambda: None,
            error: None,
        });
        (v, spec)
    } else {
        let back = stepwise(
            data,
            outcome,
            &screen.chosen.terms,
            family,
            Direction::Backward,
            criterion,
        )?;
        trace.extend(back.trace);
        warnings.extend(back.warnings);
        (back.value, back.chosen)
    };
    Ok(SelectionResult {
        method: Method::LassoBackward,
        criterion: criterion.name().into(),
        value,
        chosen,
        trace,
        warnings,
        lasso: screen.lasso,
    })
}
