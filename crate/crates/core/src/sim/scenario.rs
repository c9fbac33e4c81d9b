//! Built-in scenarios with analytic ground truth.
//!
//! | scenario | equations (all noise N(0,1)) | total effect |
//! |---|---|---|
//! | `confounding` | `C`; `X = 0.5C`; `Y = 0.3X + 0.8C` | 0.3 |
//! | `collider` | `X`; `U`; `Y = 0.3X + U`; `S = X + U` | 0.3 |
//! | `mediator` | `X`; `M = 0.5X`; `Y = 0.3X + 0.4M` | 0.5 |
//! | `figure1` | see below | 0.5 |
//!
//! The `figure1` model follows `fixtures/fig1.dag`. Its coefficients are
//! fixture choices:
//!
//! | edge | coefficient |
//! |---|---|
//! | Age, Sex, TumourSite, TumourSize -> Chemotherapy | 0.4, 0.3, 0.25, 0.5 |
//! | Age, Sex, TumourSite, TumourSize -> VTE | 0.3, 0.2, 0.35, 0.4 |
//! | Chemotherapy -> PlateletCount | 0.6 |
//! | PlateletCount -> VTE | 0.5 |
//! | Chemotherapy -> VTE | 0.2 |
//!
//! so the total effect of Chemotherapy on VTE is `0.2 + 0.6 * 0.5 = 0.5`.

use serde::Serialize;

use super::{Mechanism, Sem, SemSpec, SimError};
use crate::dag::parse_dag;

pub const SCENARIO_NAMES: [&str; 4] = ["confounding", "collider", "mediator", "figure1"];

const FIGURE1_DAG: &str = include_str!("../../fixtures/fig1.dag");

const FIGURE1_COEFFICIENTS: [(&str, &str, f64); 11] = [
    ("Age", "Chemotherapy", 0.4),
    ("Sex", "Chemotherapy", 0.3),
    ("TumourSite", "Chemotherapy", 0.25),
    ("TumourSize", "Chemotherapy", 0.5),
    ("Age", "VTE", 0.3),
    ("Sex", "VTE", 0.2),
    ("TumourSite", "VTE", 0.35),
    ("TumourSize", "VTE", 0.4),
    ("Chemotherapy", "PlateletCount", 0.6),
    ("PlateletCount", "VTE", 0.5),
    ("Chemotherapy", "VTE", 0.2),
];

/// Population coefficient of the exposure when the outcome is regressed on
/// the exposure and `adjusted_for`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticValue {
    pub description: String,
    pub adjusted_for: Vec<String>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub sem: Sem,
    pub true_total_effect: f64,
    pub analytic: Vec<AnalyticValue>,
}

impl Scenario {
    pub fn analytic_value(&self, adjusted_for: &[&str]) -> Option<f64> {
        self.analytic
            .iter()
            .find(|a| a.adjusted_for.iter().map(String::as_str).eq(adjusted_for.iter().copied()))
            .map(|a| a.value)
    }
}

fn linear(exposure: &str, outcome: &str, nodes: Vec<Mechanism>) -> Sem {
    Sem::new(SemSpec {
        exposure: Some(exposure.into()),
        outcome: Some(outcome.into()),
        nodes,
    })
    .expect("built-in scenario is a valid SEM")
}

fn figure1() -> Sem {
    let dag = parse_dag(FIGURE1_DAG).expect("fixture parses");
    let nodes = dag
        .nodes()
        .iter()
        .map(|n| {
            FIGURE1_COEFFICIENTS
                .iter()
                .filter(|(_, to, _)| to == n)
                .fold(Mechanism::gaussian(n, 1.0), |m, (from, _, c)| m.with(from, *c))
        })
        .collect();
    let sem = linear("Chemotherapy", "VTE", nodes);
    debug_assert_eq!(sem.dag().fingerprint(), dag.fingerprint());
    sem
}

/// Returns a built-in scenario by name.
pub fn builtin_scenario(name: &str) -> Result<Scenario, SimError> {
    let g = Mechanism::gaussian;
    let (sem, adjustments): (Sem, Vec<(&str, Vec<&str>)>) = match name {
        "confounding" => (
            linear(
                "X",
                "Y",
                vec![
                    g("C", 1.0),
                    g("X", 1.0).with("C", 0.5),
                    g("Y", 1.0).with("X", 0.3).with("C", 0.8),
                ],
            ),
            vec![("unadjusted (confounded)", vec![]), ("adjusted for C", vec!["C"])],
        ),
        "collider" => (
            linear(
                "X",
                "Y",
                vec![
                    g("X", 1.0),
                    g("U", 1.0),
                    g("Y", 1.0).with("X", 0.3).with("U", 1.0),
                    g("S", 1.0).with("X", 1.0).with("U", 1.0),
                ],
            ),
            vec![("unadjusted", vec![]), ("conditioned on collider S", vec!["S"])],
        ),
        "mediator" => (
            linear(
                "X",
                "Y",
                vec![
                    g("X", 1.0),
                    g("M", 1.0).with("X", 0.5),
                    g("Y", 1.0).with("X", 0.3).with("M", 0.4),
                ],
            ),
            vec![("unadjusted (total)", vec![]), ("adjusted for mediator M", vec!["M"])],
        ),
        "figure1" => {
            let confounders = vec!["Age", "Sex", "TumourSite", "TumourSize"];
            let mut with_platelets = confounders.clone();
            with_platelets.push("PlateletCount");
            (
                figure1(),
                vec![
                    ("unadjusted", vec![]),
                    ("adjusted for confounders", confounders),
                    ("adjusted for confounders and mediator", with_platelets),
                ],
            )
        }
        other => return Err(SimError::UnknownScenario(other.to_string())),
    };
    let x = sem.dag().exposure().expect("annotated").to_string();
    let y = sem.dag().outcome().expect("annotated").to_string();
    let analytic = adjustments
        .into_iter()
        .map(|(description, adj)| {
            let mut regressors = vec![x.as_str()];
            regressors.extend(&adj);
            let value = sem.population_regression(&y, &regressors)?[0];
            Ok(AnalyticValue {
                description: description.to_string(),
                adjusted_for: adj.into_iter().map(str::to_string).collect(),
                value,
            })
        })
        .collect::<Result<_, SimError>>()?;
    Ok(Scenario {
        name: name.to_string(),
        true_total_effect: sem.true_total_effect()?,
        sem,
        analytic,
    })
}

/// Signal-plus-noise benchmark for covariate selection: independent
/// standard-normal `x1..x{1+n_noise}` and `y = 2 x1 + N(0, 1)`.
pub fn selection_benchmark(n_noise: usize) -> Sem {
    let mut nodes: Vec<Mechanism> = (1..=n_noise + 1)
        .map(|i| Mechanism::gaussian(&format!("x{i}"), 1.0))
        .collect();
    nodes.push(Mechanism::gaussian("y", 1.0).with("x1", 2.0));
    linear("x1", "y", nodes)
}
