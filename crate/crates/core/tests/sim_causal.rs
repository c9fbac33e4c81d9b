mod common;

use common::*;
use glmcausal::causal::{estimate_total_effect, test_implied_independencies, CausalError, CAUSAL_LABEL};
use glmcausal::dag::{parse_dag, Condition};
use glmcausal::glm::Family;
use glmcausal::sim::{builtin_scenario, Mechanism, Sem, SemSpec, SCENARIO_NAMES};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn spec(exposure: &str, outcome: &str, nodes: Vec<Mechanism>) -> Sem {
    Sem::new(SemSpec {
        exposure: Some(exposure.into()),
        outcome: Some(outcome.into()),
        nodes,
    })
    .unwrap()
}

#[test]
fn same_seed_same_data() {
    for name in SCENARIO_NAMES {
        let sem = builtin_scenario(name).unwrap().sem;
        let a = sem.simulate(500, 42).to_csv_string();
        assert_eq!(a, sem.simulate(500, 42).to_csv_string());
        assert_ne!(a, sem.simulate(500, 43).to_csv_string());
    }
}

#[test]
fn documented_stream_is_reproduced() {
    let sem = spec(
        "X",
        "Y",
        vec![
            Mechanism { intercept: 1.0, ..Mechanism::gaussian("X", 2.0) },
            Mechanism::gaussian("Y", 0.5).with("X", -1.5),
        ],
    );
    let data = sem.simulate(50, 9);
    let mut r = ChaCha20Rng::seed_from_u64(9);
    let mut u = || (r.next_u64() >> 11) as f64 * 2f64.powi(-53);
    let (x, y) = (data.numeric("X").unwrap(), data.numeric("Y").unwrap());
    for i in 0..50 {
        let mut z = || {
            let (u1, u2) = (u(), u());
            (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        let xi = 1.0 + 2.0 * z();
        let yi = -1.5 * xi + 0.5 * z();
        assert_eq!(x[i], xi);
        assert_eq!(y[i], yi);
    }
}

#[test]
fn moments_match_implied_values() {
    let sem = builtin_scenario("figure1").unwrap().sem;
    let n = 40_000;
    let data = sem.simulate(n, 3);
    let means = sem.implied_means().unwrap();
    let cov = sem.implied_covariance().unwrap();
    for (j, name) in sem.dag().nodes().iter().enumerate() {
        let v = data.numeric(name).unwrap();
        let m = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = cov[[j, j]].sqrt();
        assert!((m - means[j]).abs() < 4.0 * sd / (n as f64).sqrt(), "{name} mean {m}");
        assert!((var.sqrt() - sd).abs() < 4.0 * sd / (2.0 * n as f64).sqrt(), "{name} sd {}", var.sqrt());
    }
}

/// Sum over directed paths of the product of edge coefficients.
fn path_walk(sem: &Sem, from: &str, to: &str) -> f64 {
    if from == to {
        return 1.0;
    }
    sem.mechanism(to)
        .unwrap()
        .coefficients
        .iter()
        .map(|(parent, c)| c * path_walk(sem, from, parent))
        .sum()
}

#[test]
fn total_effect_matches_path_walk() {
    let fig = builtin_scenario("figure1").unwrap();
    assert!((fig.true_total_effect - path_walk(&fig.sem, "Chemotherapy", "VTE")).abs() < 1e-12);
    assert!((fig.true_total_effect - 0.5).abs() < 1e-12);

    let mut r = rng(17);
    for _ in 0..200 {
        let adj = random_dag(6, 0.5, &mut r);
        let nodes: Vec<Mechanism> = (0..6)
            .map(|b| {
                (0..6)
                    .filter(|&a| adj[a][b])
                    .fold(Mechanism::gaussian(&name(b), 1.0), |m, a| m.with(&name(a), normal(&mut r)))
            })
            .collect();
        let (x, y) = (0, 5);
        let sem = spec(&name(x), &name(y), nodes);
        let got = sem.true_total_effect().unwrap();
        let want = path_walk(&sem, &name(x), &name(y));
        assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "{got} vs {want}");
    }
}

#[test]
fn independent_causes_conditioned_on_collider() {
    let sem = spec(
        "X",
        "Y",
        vec![
            Mechanism::gaussian("X", 1.0),
            Mechanism::gaussian("Y", 1.0),
            Mechanism::gaussian("S", 1.0).with("X", 1.0).with("Y", 1.0),
        ],
    );
    assert!((sem.population_regression("Y", &["X", "S"]).unwrap()[0] + 0.5).abs() < 1e-12);
    assert!(sem.population_regression("Y", &["X"]).unwrap()[0].abs() < 1e-12);
}

#[test]
fn sem_json_round_trip() {
    let sem = builtin_scenario("collider").unwrap().sem;
    let back = Sem::from_json(&sem.to_json()).unwrap();
    assert_eq!(back, sem);
}

#[test]
fn figure_one_effect_covers_truth_across_seeds() {
    let sc = builtin_scenario("figure1").unwrap();
    let dag = parse_dag(FIG1).unwrap();
    let (mut covered, mut estimates) = (0, Vec::new());
    for seed in 0..60 {
        let data = sc.sem.simulate(2000, 1000 + seed);
        let r = estimate_total_effect(&dag, &data, Family::Gaussian, None).unwrap();
        assert_eq!(r.adjustment_set, ["Age", "Sex", "TumourSite", "TumourSize"]);
        assert!(!r.non_causal_coefficients.contains_key("PlateletCount"));
        assert_eq!(r.causal_label_count(), 1);
        covered += usize::from(r.effect.ci_low <= 0.5 && 0.5 <= r.effect.ci_high);
        estimates.push(r.effect.estimate);
    }
    assert!(covered > 50, "{covered} of 60 intervals cover the truth");
    let m = estimates.iter().sum::<f64>() / 60.0;
    let sd = (estimates.iter().map(|e| (e - m).powi(2)).sum::<f64>() / 59.0).sqrt();
    assert!((m - 0.5).abs() < 3.0 * sd / 60f64.sqrt(), "mean {m}");
}

#[test]
fn binary_exposure_effect_recovered() {
    let sem = spec(
        "X",
        "Y",
        vec![
            Mechanism::gaussian("C", 1.0),
            Mechanism::bernoulli("X", -0.2).with("C", 1.0),
            Mechanism::gaussian("Y", 1.0).with("X", 0.7).with("C", 0.5),
        ],
    );
    assert!((sem.true_total_effect().unwrap() - 0.7).abs() < 1e-12);
    let data = sem.simulate(8000, 5);
    let r = estimate_total_effect(sem.dag(), &data, Family::Gaussian, None).unwrap();
    assert_eq!(r.adjustment_set, ["C"]);
    assert!((r.effect.estimate - 0.7).abs() < 4.0 * r.effect.se);
}

#[test]
fn binary_outcome_effect_on_log_odds_scale() {
    let sem = spec(
        "X",
        "Y",
        vec![
            Mechanism::gaussian("C", 1.0),
            Mechanism::gaussian("X", 1.0).with("C", 0.6),
            Mechanism::bernoulli("Y", 0.1).with("X", 0.8).with("C", -0.5),
        ],
    );
    let data = sem.simulate(10_000, 8);
    let r = estimate_total_effect(sem.dag(), &data, Family::Binomial, None).unwrap();
    assert_eq!(r.effect.scale, "log-odds");
    assert!((r.effect.estimate - 0.8).abs() < 4.0 * r.effect.se, "{}", r.effect.estimate);
    assert!(r.render_text().lines().filter(|l| l.contains(CAUSAL_LABEL)).count() == 1);
}

#[test]
fn mediator_override_rejected_with_path() {
    let sc = builtin_scenario("figure1").unwrap();
    let data = sc.sem.simulate(200, 1);
    let set: Vec<String> = ["Age", "Sex", "TumourSite", "TumourSize", "PlateletCount"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let err = estimate_total_effect(sc.sem.dag(), &data, Family::Gaussian, Some(&set)).unwrap_err();
    assert!(matches!(err, CausalError::InvalidOverride { .. }));
    assert_eq!(err.failed_condition(), Some(Condition::NoCausalBlocked));
    assert!(err.to_string().contains("Chemotherapy -> PlateletCount -> VTE"));
}

#[test]
fn faithful_chain_passes_independence_test() {
    let sem = spec(
        "A",
        "C",
        vec![
            Mechanism::gaussian("A", 1.0),
            Mechanism::gaussian("B", 1.0).with("A", 0.8),
            Mechanism::gaussian("C", 1.0).with("B", 0.8),
        ],
    );
    let dag = parse_dag(CHAIN).unwrap();
    let mut passed = 0;
    for seed in 0..20 {
        let t = test_implied_independencies(&dag, &sem.simulate(1000, seed), 0.05, 3).unwrap();
        assert_eq!(t.len(), 1);
        passed += usize::from(t[0].consistent);
    }
    assert!(passed >= 16, "{passed}");
}
