use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Error distribution together with its canonical link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Normal errors, identity link.
    Gaussian,
    /// Bernoulli outcome, logit link.
    Binomial,
    /// Count outcome, log link.
    Poisson,
}

const EPS: f64 = f64::EPSILON;

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Binomial => "binomial",
            Family::Poisson => "poisson",
        }
    }

    pub fn link_name(self) -> &'static str {
        match self {
            Family::Gaussian => "identity",
            Family::Binomial => "logit",
            Family::Poisson => "log",
        }
    }

    /// Scale on which coefficients are expressed.
    pub fn coefficient_scale(self) -> &'static str {
        match self {
            Family::Gaussian => "identity",
            Family::Binomial => "log-odds",
            Family::Poisson => "log-rate",
        }
    }

    /// Whether the dispersion is estimated (and counts as a parameter).
    pub fn has_dispersion(self) -> bool {
        matches!(self, Family::Gaussian)
    }

    pub fn link(self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => mu,
            Family::Binomial => (mu / (1.0 - mu)).ln(),
            Family::Poisson => mu.ln(),
        }
    }

    pub fn inverse_link(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => eta,
            Family::Binomial => {
                let mu = if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                };
                mu.clamp(EPS, 1.0 - EPS)
            }
            Family::Poisson => eta.exp().max(EPS),
        }
    }

    /// `d mu / d eta`
    pub fn mu_eta(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Binomial => {
                let e = (-eta.abs()).exp();
                (e / ((1.0 + e) * (1.0 + e))).max(EPS)
            }
            Family::Poisson => eta.exp().max(EPS),
        }
    }

    pub fn variance(self, mu: f64) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Binomial => mu * (1.0 - mu),
            Family::Poisson => mu,
        }
    }

    /// IRLS starting means.
    pub fn initial_mu(self, y: f64) -> f64 {
        match self {
            Family::Gaussian => y,
            Family::Binomial => (y + 0.5) / 2.0,
            Family::Poisson => y + 0.1,
        }
    }

    pub fn valid_response(self, y: f64) -> bool {
        match self {
            Family::Gaussian => y.is_finite(),
            Family::Binomial => y == 0.0 || y == 1.0,
            Family::Poisson => y >= 0.0 && y.fract() == 0.0 && y.is_finite(),
        }
    }

    pub fn response_requirement(self) -> &'static str {
        match self {
            Family::Gaussian => "finite values",
            Family::Binomial => "only 0 and 1",
            Family::Poisson => "non-negative integers",
        }
    }

    /// Unit deviance contribution.
    pub fn unit_deviance(self, y: f64, mu: f64) -> f64 {
        match self {
            Family::Gaussian => (y - mu) * (y - mu),
            Family::Binomial => -2.0 * (xlogy(y, mu) + xlogy(1.0 - y, 1.0 - mu)),
            Family::Poisson => 2.0 * (xlogy(y, y) - xlogy(y, mu) - (y - mu)),
        }
    }

    pub fn deviance(self, y: &[f64], mu: &[f64]) -> f64 {
        y.iter().zip(mu).map(|(&y, &m)| self.unit_deviance(y, m)).sum()
    }

    /// Log-likelihood at fitted means. The gaussian case uses the profile
    /// maximum-likelihood variance `deviance / n`.
    pub fn log_likelihood(self, y: &[f64], mu: &[f64]) -> f64 {
        match self {
            Family::Gaussian => {
                let n = y.len() as f64;
                let sigma2 = self.deviance(y, mu) / n;
                -0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0)
            }
            Family::Binomial => y
                .iter()
                .zip(mu)
                .map(|(&y, &m)| xlogy(y, m) + xlogy(1.0 - y, 1.0 - m))
                .sum(),
            Family::Poisson => y
                .iter()
                .zip(mu)
                .map(|(&y, &m)| xlogy(y, m) - m - ln_gamma(y + 1.0))
                .sum(),
        }
    }
}

/// `x * ln(y)` with `0 * ln(0) = 0`.
fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "binomial" | "logistic" | "logit" => Ok(Family::Binomial),
            "poisson" => Ok(Family::Poisson),
            other => Err(format!("unknown family '{other}'")),
        }
    }
}
