//! Generalised linear models fitted by maximum likelihood with iteratively
//! reweighted least squares.
//!
//! Each weighted least-squares step is solved by Householder QR of the
//! row-scaled design. The gaussian family is solved in a single step, which
//! is ordinary least squares.

pub mod data;
mod design;
mod family;
pub mod linalg;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use data::{Column, Dataset};
pub use design::{build_design, Design, DesignLayout, ModelSpec, Term, TermEncoder, Transform};
pub use family::Family;

use linalg::{weighted_least_squares, Qr};

/// Relative change in deviance below which IRLS stops.
pub const DEVIANCE_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 100;
/// `|R_kk|` below this fraction of the largest `|R_kk|` is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Fitted probabilities this close to 0 or 1 flag quasi-separation.
pub const SEPARATION_TOLERANCE: f64 = 1e-10;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GlmError {
    #[error("csv error: {0}")]
    Csv(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("missing value in column {column} at data row {row}")]
    MissingValue { column: String, row: usize },
    #[error("duplicate column {0}")]
    DuplicateColumn(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("column {0} is not numeric")]
    NotNumeric(String),
    #[error("outcome {0} also appears among the terms")]
    OutcomeInTerms(String),
    #[error("log of non-positive value {value} in column {column} at row {row}")]
    NonPositiveLog { column: String, row: usize, value: f64 },
    #[error("{family} outcome {column} must contain {}; row {row} has {value}", .family.response_requirement())]
    InvalidResponse {
        column: String,
        family: Family,
        row: usize,
        value: f64,
    },
    #[error("transform {0} cannot be applied to a categorical column")]
    CategoricalTransform(String),
    #[error("column {0} has zero variance")]
    ZeroVariance(String),
    #[error("level {level} of {column} was not seen when the model was fitted")]
    UnseenLevel { column: String, level: String },
    #[error("design is rank deficient: column {column} is collinear with earlier columns")]
    RankDeficient { column: String },
    #[error("{n} observations cannot identify {p} coefficients")]
    InsufficientRows { n: usize, p: usize },
    #[error("IRLS did not converge in {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("{0} is only defined for the gaussian family")]
    GaussianOnly(&'static str),
}

/// Iteration record of an IRLS fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub final_step_norm: f64,
    /// Log-likelihood after each accepted iteration.
    pub loglik_trace: Vec<f64>,
}

/// A fitted model: coefficients in design-column order (intercept first)
/// with their likelihood summaries.
#[derive(Debug, Clone)]
pub struct FittedGlm {
    pub family: Family,
    pub outcome: String,
    pub columns: Vec<String>,
    pub coefficients: Array1<f64>,
    /// Covariance of the coefficients; absent when `n <= p`.
    pub covariance: Option<Array2<f64>>,
    pub fitted: Array1<f64>,
    pub log_likelihood: f64,
    pub deviance: f64,
    pub null_deviance: f64,
    pub n: usize,
    pub p: usize,
    pub convergence: Convergence,
    pub warnings: Vec<String>,
    pub layout: DesignLayout,
}

impl FittedGlm {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|i| self.coefficients[i])
    }

    /// Square roots of the covariance diagonal.
    pub fn std_errors(&self) -> Option<Array1<f64>> {
        self.covariance
            .as_ref()
            .map(|c| c.diag().mapv(|v| v.max(0.0).sqrt()))
    }

    pub fn std_error(&self, name: &str) -> Option<f64> {
        let i = self.columns.iter().position(|c| c == name)?;
        self.std_errors().map(|se| se[i])
    }

    /// Number of likelihood parameters: coefficients plus the gaussian
    /// variance.
    pub fn n_parameters(&self) -> usize {
        self.p + usize::from(self.family.has_dispersion())
    }

    pub fn aic(&self) -> f64 {
        aic(self.log_likelihood, self.n_parameters())
    }

    pub fn bic(&self) -> f64 {
        bic(self.log_likelihood, self.n_parameters(), self.n)
    }

    /// `1 - deviance / null deviance` (gaussian only).
    pub fn r_squared(&self) -> Result<f64, GlmError> {
        if self.family != Family::Gaussian {
            return Err(GlmError::GaussianOnly("R-squared"));
        }
        if self.null_deviance == 0.0 {
            return Ok(if self.deviance == 0.0 { 1.0 } else { 0.0 });
        }
        Ok(1.0 - self.deviance / self.null_deviance)
    }

    pub fn adjusted_r2(&self) -> Result<f64, GlmError> {
        let r2 = self.r_squared()?;
        if self.n <= self.p {
            return Err(GlmError::InsufficientRows { n: self.n, p: self.p });
        }
        Ok(adjusted_r2(r2, self.n, self.p))
    }

    /// Expected outcome on the mean scale for new rows.
    pub fn predict(&self, data: &Dataset) -> Result<Array1<f64>, GlmError> {
        let x = self.layout.encode(data)?;
        Ok(self.predict_matrix(x.view()))
    }

    pub fn predict_matrix(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        x.dot(&self.coefficients).mapv(|eta| self.family.inverse_link(eta))
    }
}

/// `2k - 2 logLik`
pub fn aic(log_likelihood: f64, k: usize) -> f64 {
    2.0 * k as f64 - 2.0 * log_likelihood
}

/// `k ln(n) - 2 logLik`
pub fn bic(log_likelihood: f64, k: usize, n: usize) -> f64 {
    k as f64 * (n as f64).ln() - 2.0 * log_likelihood
}

pub fn bic_real_n(log_likelihood: f64, k: usize, n: f64) -> f64 {
    k as f64 * n.ln() - 2.0 * log_likelihood
}

/// `1 - (1 - R^2)(n - 1)/(n - p)` with `p` counting the intercept.
pub fn adjusted_r2(r2: f64, n: usize, p: usize) -> f64 {
    1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - p as f64)
}

/// Log-likelihood of `beta` for the given design; used for score checks.
pub fn log_likelihood_at(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: Family,
    beta: ArrayView1<'_, f64>,
) -> f64 {
    let mu: Vec<f64> = x.dot(&beta).iter().map(|&e| family.inverse_link(e)).collect();
    family.log_likelihood(y.as_slice().expect("contiguous"), &mu)
}

/// Gradient of the log-likelihood with respect to the coefficients.
pub fn score_at(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: Family,
    beta: ArrayView1<'_, f64>,
) -> Array1<f64> {
    let eta = x.dot(&beta);
    let mu = eta.mapv(|e| family.inverse_link(e));
    let mut r: Array1<f64> = ndarray::Zip::from(&y)
        .and(&mu)
        .and(&eta)
        .map_collect(|&y, &m, &e| (y - m) * family.mu_eta(e) / family.variance(m));
    if family == Family::Gaussian {
        // Profile likelihood: d/dbeta of -n/2 ln(RSS/n) = X^T r / sigma^2.
        let n = y.len() as f64;
        let rss: f64 = ndarray::Zip::from(&y).and(&mu).fold(0.0, |a, &y, &m| a + (y - m).powi(2));
        r /= rss / n;
    }
    x.t().dot(&r)
}

/// Fits `spec` to `data`.
pub fn fit(data: &Dataset, spec: &ModelSpec) -> Result<FittedGlm, GlmError> {
    let design = build_design(data, spec)?;
    fit_design(&design, spec.family)
}

/// Fits a prepared design.
pub fn fit_design(design: &Design, family: Family) -> Result<FittedGlm, GlmError> {
    let out = fit_irls(design.x.view(), design.y.view(), family, &design.columns)?;
    Ok(FittedGlm {
        family,
        outcome: design.outcome.clone(),
        columns: design.columns.clone(),
        layout: design.layout.clone(),
        ..out
    })
}

/// IRLS on a raw design matrix whose first column is the intercept.
/// `names` label the columns in error messages.
pub fn fit_irls(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: Family,
    names: &[String],
) -> Result<FittedGlm, GlmError> {
    let (n, p) = x.dim();
    if y.len() != n || names.len() != p {
        return Err(GlmError::Shape(format!(
            "{n}x{p} design, {} responses, {} names",
            y.len(),
            names.len()
        )));
    }
    if n < p || n == 0 {
        return Err(GlmError::InsufficientRows { n, p });
    }
    if let Some(row) = y.iter().position(|&v| !family.valid_response(v)) {
        return Err(GlmError::InvalidResponse {
            column: "response".into(),
            family,
            row: row + 1,
            value: y[row],
        });
    }
    check_rank(&Qr::new(x), names)?;

    let y_slice = y.to_vec();
    let ones = Array1::<f64>::ones(n);

    let (beta, qr, iterations, step_norm, trace) = if family == Family::Gaussian {
        let (beta, qr) = weighted_least_squares(x, y, ones.view());
        let mu = x.dot(&beta);
        let ll = family.log_likelihood(&y_slice, mu.as_slice().unwrap());
        let norm = beta.dot(&beta).sqrt();
        (beta, qr, 1, norm, vec![ll])
    } else {
        irls_loop(x, y, family, names)?
    };

    let eta = x.dot(&beta);
    let mu = eta.mapv(|e| family.inverse_link(e));
    let mu_slice = mu.as_slice().unwrap();
    let deviance = family.deviance(&y_slice, mu_slice);
    let log_likelihood = family.log_likelihood(&y_slice, mu_slice);

    let null_deviance = null_deviance(&y_slice, family);

    let covariance = (n > p).then(|| {
        let dispersion = if family.has_dispersion() {
            deviance / (n - p) as f64
        } else {
            1.0
        };
        qr.gram_inverse() * dispersion
    });

    let mut warnings = Vec::new();
    if family == Family::Binomial
        && mu
            .iter()
            .any(|&m| m < SEPARATION_TOLERANCE || m > 1.0 - SEPARATION_TOLERANCE)
    {
        warnings.push(
            "fitted probabilities numerically 0 or 1 occurred (quasi-separation)".to_string(),
        );
    }

    Ok(FittedGlm {
        family,
        outcome: "y".into(),
        columns: names.to_vec(),
        coefficients: beta,
        covariance,
        fitted: mu,
        log_likelihood,
        deviance,
        null_deviance,
        n,
        p,
        convergence: Convergence {
            iterations,
            final_step_norm: step_norm,
            loglik_trace: trace,
        },
        warnings,
        layout: DesignLayout { encoders: vec![] },
    })
}

type IrlsState = (Array1<f64>, Qr, usize, f64, Vec<f64>);

fn irls_loop(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    family: Family,
    names: &[String],
) -> Result<IrlsState, GlmError> {
    let y_slice = y.to_vec();
    let mut mu = y.mapv(|v| family.initial_mu(v));
    let mut eta = mu.mapv(|m| family.link(m));
    let mut dev_old = family.deviance(&y_slice, mu.as_slice().unwrap());
    let mut beta: Option<Array1<f64>> = None;
    let mut trace = Vec::new();

    for iter in 1..=MAX_ITERATIONS {
        let mu_eta = eta.mapv(|e| family.mu_eta(e));
        let z = ndarray::Zip::from(&eta)
            .and(&y)
            .and(&mu)
            .and(&mu_eta)
            .map_collect(|&e, &y, &m, &d| e + (y - m) / d);
        let w = ndarray::Zip::from(&mu_eta)
            .and(&mu)
            .map_collect(|&d, &m| d * d / family.variance(m));
        let (mut candidate, qr) = weighted_least_squares(x, z.view(), w.view());
        check_rank(&qr, names)?;

        let evaluate = |b: &Array1<f64>| {
            let eta = x.dot(b);
            let mu = eta.mapv(|e| family.inverse_link(e));
            let dev = family.deviance(&y_slice, mu.as_slice().unwrap());
            (eta, mu, dev)
        };
        let (mut eta_new, mut mu_new, mut dev_new) = evaluate(&candidate);

        // Step halving keeps the likelihood from decreasing.
        let mut stalled = false;
        if let Some(prev) = &beta {
            let mut halvings = 0;
            while !dev_new.is_finite() || dev_new > dev_old {
                if halvings == MAX_HALVINGS {
                    stalled = true;
                    break;
                }
                candidate = (&candidate + prev) / 2.0;
                (eta_new, mu_new, dev_new) = evaluate(&candidate);
                halvings += 1;
            }
        } else if !dev_new.is_finite() {
            return Err(GlmError::NotConverged { iterations: iter });
        }
        if stalled {
            let prev = beta.clone().unwrap();
            let (_, qr) = final_weights_qr(x, family, &prev);
            return Ok((prev, qr, iter, 0.0, trace));
        }

        let step = match &beta {
            Some(prev) => {
                let d = &candidate - prev;
                d.dot(&d).sqrt()
            }
            None => candidate.dot(&candidate).sqrt(),
        };
        let converged = (dev_new - dev_old).abs() / (dev_new.abs() + 0.1) < DEVIANCE_TOLERANCE;
        trace.push(family.log_likelihood(&y_slice, mu_new.as_slice().unwrap()));
        eta = eta_new;
        mu = mu_new;
        dev_old = dev_new;
        beta = Some(candidate);

        if converged {
            let mut beta = beta.unwrap();
            let mut iterations = iter;
            // Polishing step after the deviance has settled.
            let mu_eta = eta.mapv(|e| family.mu_eta(e));
            let z = ndarray::Zip::from(&eta)
                .and(&y)
                .and(&mu)
                .and(&mu_eta)
                .map_collect(|&e, &y, &m, &d| e + (y - m) / d);
            let w = ndarray::Zip::from(&mu_eta)
                .and(&mu)
                .map_collect(|&d, &m| d * d / family.variance(m));
            let (polished, _) = weighted_least_squares(x, z.view(), w.view());
            let mu_p = x.dot(&polished).mapv(|e| family.inverse_link(e));
            let dev_p = family.deviance(&y_slice, mu_p.as_slice().unwrap());
            if dev_p.is_finite() && dev_p <= dev_old + 1e-12 * (dev_old.abs() + 0.1) {
                trace.push(family.log_likelihood(&y_slice, mu_p.as_slice().unwrap()));
                beta = polished;
                iterations += 1;
            }
            let (_, qr) = final_weights_qr(x, family, &beta);
            return Ok((beta, qr, iterations, step, trace));
        }
    }
    Err(GlmError::NotConverged {
        iterations: MAX_ITERATIONS,
    })
}

/// QR of the design scaled by the working weights at `beta`, for the
/// covariance at the optimum.
fn final_weights_qr(x: ArrayView2<'_, f64>, family: Family, beta: &Array1<f64>) -> (Array1<f64>, Qr) {
    let eta = x.dot(beta);
    let w = eta.mapv(|e| {
        let d = family.mu_eta(e);
        d * d / family.variance(family.inverse_link(e))
    });
    let sw = w.mapv(f64::sqrt);
    let xw = &x * &sw.view().insert_axis(ndarray::Axis(1));
    (w, Qr::new(xw.view()))
}

fn check_rank(qr: &Qr, names: &[String]) -> Result<(), GlmError> {
    match qr.deficient_column(RANK_TOLERANCE) {
        Some(j) => Err(GlmError::RankDeficient {
            column: names[j].clone(),
        }),
        None => Ok(()),
    }
}

fn null_deviance(y: &[f64], family: Family) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mu = vec![mean; y.len()];
    family.deviance(y, &mu)
}
