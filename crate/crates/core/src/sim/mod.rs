//! Linear structural equation models with known ground truth.
//!
//! # Random stream
//!
//! Simulation uses ChaCha20 (`rand_chacha::ChaCha20Rng`, 20 rounds) seeded
//! with `seed_from_u64(seed)`. A uniform variate is
//! `(next_u64() >> 11) * 2^-53`, which lies in `[0, 1)`. A standard normal is
//! produced by the Box-Muller cosine branch from two consecutive uniforms
//! `u1, u2`: `sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`. A Bernoulli-logit node
//! draws one uniform `u` and takes the value 1 when `u < 1/(1 + e^-eta)`.
//! Rows are generated one at a time; within a row nodes are visited in
//! topological order and each draws its own variates. The stream is
//! therefore fixed by `(sem, n, seed)` on every platform.

mod scenario;

use std::f64::consts::PI;

use indexmap::IndexMap;
use ndarray::{Array1, Array2};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dag::{Annotation, Dag, DagError};
use crate::glm::linalg::Qr;
use crate::glm::{Column, Dataset};

pub use scenario::{builtin_scenario, selection_benchmark, AnalyticValue, Scenario, SCENARIO_NAMES};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error("node {node} has a coefficient on {parent}, which is not a declared node")]
    UnknownParent { node: String, parent: String },
    #[error("node {0} is declared twice")]
    DuplicateNode(String),
    #[error("{0} must be annotated")]
    MissingRole(&'static str),
    #[error("node {0} is bernoulli; the total effect has no closed form, compare estimates on simulated data instead")]
    NonLinearPath(String),
    #[error("node {0} is bernoulli; moments are only available for linear-gaussian models")]
    NotGaussian(String),
    #[error("unknown scenario '{0}' (expected one of: confounding, collider, mediator, figure1)")]
    UnknownScenario(String),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("noise sd for {node} must be non-negative and finite, got {sd}")]
    InvalidSd { node: String, sd: f64 },
    #[error("invalid SEM JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Noise {
    /// Additive normal noise.
    Gaussian { sd: f64 },
    /// Binary node with `P(1) = logistic(linear predictor)`.
    BernoulliLogit,
}

/// Structural equation of one node: intercept plus linear effects of its
/// parents, and a noise model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub name: String,
    #[serde(default)]
    pub intercept: f64,
    /// Parent name to edge coefficient; the keys are the node's parents.
    #[serde(default)]
    pub coefficients: IndexMap<String, f64>,
    pub noise: Noise,
}

impl Mechanism {
    pub fn gaussian(name: &str, sd: f64) -> Self {
        Self {
            name: name.into(),
            intercept: 0.0,
            coefficients: IndexMap::new(),
            noise: Noise::Gaussian { sd },
        }
    }

    pub fn with(mut self, parent: &str, coefficient: f64) -> Self {
        self.coefficients.insert(parent.into(), coefficient);
        self
    }

    pub fn bernoulli(name: &str, intercept: f64) -> Self {
        Self {
            name: name.into(),
            intercept,
            coefficients: IndexMap::new(),
            noise: Noise::BernoulliLogit,
        }
    }
}

/// JSON form of a [`Sem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    /// Mechanisms in declaration order.
    pub nodes: Vec<Mechanism>,
}

/// A structural equation model. The graph is derived from the mechanisms,
/// so every node's parents are exactly the variables its equation uses.
#[derive(Debug, Clone, PartialEq)]
pub struct Sem {
    dag: Dag,
    /// Indexed like `dag.nodes()`.
    mechanisms: Vec<Mechanism>,
}

impl Sem {
    pub fn new(spec: SemSpec) -> Result<Self, SimError> {
        let names: Vec<String> = spec.nodes.iter().map(|m| m.name.clone()).collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(SimError::DuplicateNode(n.clone()));
            }
        }
        let mut edges = Vec::new();
        for m in &spec.nodes {
            if let Noise::Gaussian { sd } = m.noise {
                if !(sd.is_finite() && sd >= 0.0) {
                    return Err(SimError::InvalidSd {
                        node: m.name.clone(),
                        sd,
                    });
                }
            }
            for p in m.coefficients.keys() {
                if !names.contains(p) {
                    return Err(SimError::UnknownParent {
                        node: m.name.clone(),
                        parent: p.clone(),
                    });
                }
                edges.push((p.clone(), m.name.clone()));
            }
        }
        let roles = spec
            .exposure
            .into_iter()
            .map(|e| (e, Annotation::Exposure))
            .chain(spec.outcome.into_iter().map(|o| (o, Annotation::Outcome)));
        let dag = Dag::new(names, edges, roles)?;
        Ok(Self {
            dag,
            mechanisms: spec.nodes,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let spec: SemSpec = serde_json::from_str(text).map_err(|e| SimError::Json(e.to_string()))?;
        Self::new(spec)
    }

    pub fn spec(&self) -> SemSpec {
        SemSpec {
            exposure: self.dag.exposure().map(str::to_string),
            outcome: self.dag.outcome().map(str::to_string),
            nodes: self.mechanisms.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.spec()).expect("SEM serialises")
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn mechanisms(&self) -> &[Mechanism] {
        &self.mechanisms
    }

    pub fn mechanism(&self, name: &str) -> Option<&Mechanism> {
        self.mechanisms.iter().find(|m| m.name == name)
    }

    fn index(&self, name: &str) -> Result<usize, SimError> {
        self.dag
            .nodes()
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| SimError::UnknownVariable(name.to_string()))
    }

    /// Mechanism indices in topological order.
    fn order(&self) -> Vec<usize> {
        self.dag
            .topological_order()
            .into_iter()
            .map(|n| self.index(n).expect("dag node"))
            .collect()
    }

    /// Re-annotates exposure and outcome.
    pub fn with_roles(&self, exposure: &str, outcome: &str) -> Result<Self, SimError> {
        Ok(Self {
            dag: self.dag.with_roles(exposure, outcome)?,
            mechanisms: self.mechanisms.clone(),
        })
    }

    /// Sum over directed exposure-to-outcome paths of the product of edge
    /// coefficients. Bernoulli nodes after the exposure on such a path have
    /// no closed-form effect and are an error.
    pub fn true_total_effect(&self) -> Result<f64, SimError> {
        let x = self.dag.exposure().ok_or(SimError::MissingRole("exposure"))?;
        let y = self.dag.outcome().ok_or(SimError::MissingRole("outcome"))?;
        let downstream = self.dag.descendants(x)?;
        let mut upstream = self.dag.ancestors(y)?;
        upstream.insert(y.to_string());
        let xi = self.index(x)?;
        let mut effect = vec![0.0; self.mechanisms.len()];
        effect[xi] = 1.0;
        for v in self.order() {
            let m = &self.mechanisms[v];
            if v == xi || !downstream.contains(&m.name) || !upstream.contains(&m.name) {
                continue;
            }
            if m.noise == Noise::BernoulliLogit {
                return Err(SimError::NonLinearPath(m.name.clone()));
            }
            effect[v] = m
                .coefficients
                .iter()
                .map(|(p, c)| c * effect[self.index(p).expect("parent")])
                .sum();
        }
        Ok(effect[self.index(y)?])
    }

    fn require_gaussian(&self) -> Result<(), SimError> {
        match self.mechanisms.iter().find(|m| m.noise == Noise::BernoulliLogit) {
            Some(m) => Err(SimError::NotGaussian(m.name.clone())),
            None => Ok(()),
        }
    }

    /// Population means implied by the intercepts.
    pub fn implied_means(&self) -> Result<Array1<f64>, SimError> {
        self.require_gaussian()?;
        let mut mean = Array1::zeros(self.mechanisms.len());
        for v in self.order() {
            let m = &self.mechanisms[v];
            mean[v] = m.intercept
                + m.coefficients
                    .iter()
                    .map(|(p, c)| c * mean[self.index(p).expect("parent")])
                    .sum::<f64>();
        }
        Ok(mean)
    }

    /// Population covariance `T diag(sd^2) T'` where row `v` of `T` gives
    /// the loading of node `v` on every noise term. Rows and columns follow
    /// `dag().nodes()`.
    pub fn implied_covariance(&self) -> Result<Array2<f64>, SimError> {
        self.require_gaussian()?;
        let k = self.mechanisms.len();
        let mut t = Array2::<f64>::zeros((k, k));
        for v in self.order() {
            let m = &self.mechanisms[v];
            let mut row = Array1::<f64>::zeros(k);
            row[v] = 1.0;
            for (p, c) in &m.coefficients {
                row.scaled_add(*c, &t.row(self.index(p).expect("parent")));
            }
            t.row_mut(v).assign(&row);
        }
        let var: Array1<f64> = self
            .mechanisms
            .iter()
            .map(|m| match m.noise {
                Noise::Gaussian { sd } => sd * sd,
                Noise::BernoulliLogit => unreachable!(),
            })
            .collect();
        let scaled = &t * &var.view().insert_axis(ndarray::Axis(0));
        Ok(scaled.dot(&t.t()))
    }

    /// Population least-squares slopes of `outcome` on `regressors`
    /// (intercept implicit), in the order given.
    pub fn population_regression(&self, outcome: &str, regressors: &[&str]) -> Result<Vec<f64>, SimError> {
        let cov = self.implied_covariance()?;
        let yi = self.index(outcome)?;
        let xi: Vec<usize> = regressors.iter().map(|r| self.index(r)).collect::<Result<_, _>>()?;
        if xi.is_empty() {
            return Ok(vec![]);
        }
        let sxx = Array2::from_shape_fn((xi.len(), xi.len()), |(a, b)| cov[[xi[a], xi[b]]]);
        let sxy: Array1<f64> = xi.iter().map(|&a| cov[[a, yi]]).collect();
        Ok(Qr::new(sxx.view()).solve(sxy.view()).to_vec())
    }

    /// Draws `n` rows. See the module documentation for the exact stream.
    pub fn simulate(&self, n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let order = self.order();
        let parents: Vec<Vec<(usize, f64)>> = self
            .mechanisms
            .iter()
            .map(|m| {
                m.coefficients
                    .iter()
                    .map(|(p, c)| (self.index(p).expect("parent"), *c))
                    .collect()
            })
            .collect();
        let k = self.mechanisms.len();
        let mut cols = vec![Vec::with_capacity(n); k];
        let mut row = vec![0.0; k];
        for _ in 0..n {
            for &v in &order {
                let m = &self.mechanisms[v];
                let eta = m.intercept + parents[v].iter().map(|&(p, c)| c * row[p]).sum::<f64>();
                row[v] = match m.noise {
                    Noise::Gaussian { sd } => eta + sd * standard_normal(&mut rng),
                    Noise::BernoulliLogit => {
                        let p = 1.0 / (1.0 + (-eta).exp());
                        f64::from(u8::from(uniform(&mut rng) < p))
                    }
                };
            }
            for v in 0..k {
                cols[v].push(row[v]);
            }
        }
        Dataset::new(
            self.dag.nodes().to_vec(),
            cols.into_iter().map(Column::Numeric).collect(),
        )
        .expect("simulated columns are rectangular and finite")
    }
}

/// Uniform on `[0, 1)` from the top 53 bits of one 64-bit output.
pub fn uniform<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Box-Muller, cosine branch.
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    let u1 = uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
}
