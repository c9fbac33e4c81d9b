use rayon::prelude::*;

use super::{Criterion, Method, PredictError, SelectionResult, TraceEntry};
use crate::glm::{fit, Dataset, Family, ModelSpec, Term};

/// Hard ceiling on best-subsets candidates (2^20 fits).
pub const MAX_SUBSET_CANDIDATES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

fn spec_of(outcome: &str, family: Family, candidates: &[Term], subset: &[usize]) -> ModelSpec {
    ModelSpec::new(
        outcome,
        subset.iter().map(|&i| candidates[i].clone()).collect(),
        family,
    )
}

fn evaluate(
    data: &Dataset,
    spec: &ModelSpec,
    criterion: Criterion,
    stage: &str,
) -> TraceEntry {
    let (value, error) = match fit(data, spec) {
        Ok(f) => (Some(criterion.of(&f)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    TraceEntry {
        stage: stage.to_string(),
        terms: spec.term_labels(),
        value,
        lambda: None,
        error,
    }
}

/// Subsets ordered by size, then lexicographically by candidate position.
fn subsets_in_order(m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(1 << m);
    for k in 0..=m {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(idx.clone());
            // Advance to the next k-combination.
            let Some(i) = (0..k).rev().find(|&i| idx[i] != i + m - k) else {
                break;
            };
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    out
}

/// Fits every subset of `candidates` (the empty subset is the
/// intercept-only model) and returns the one minimising `criterion`. Ties go
/// to fewer terms, then to the earlier subset in candidate order.
pub fn best_subsets(
    data: &Dataset,
    outcome: &str,
    candidates: &[Term],
    family: Family,
    criterion: Criterion,
) -> Result<SelectionResult, PredictError> {
    if candidates.len() > MAX_SUBSET_CANDIDATES {
        return Err(PredictError::TooManyCandidates {
            got: candidates.len(),
            max: MAX_SUBSET_CANDIDATES,
        });
    }
    let subsets = subsets_in_order(candidates.len());
    let trace: Vec<TraceEntry> = subsets
        .par_iter()
        .map(|s| evaluate(data, &spec_of(outcome, family, candidates, s), criterion, "subsets"))
        .collect();

    let mut best: Option<(usize, f64)> = None;
    let mut warnings = Vec::new();
    for (i, entry) in trace.iter().enumerate() {
        match entry.value {
            Some(v) if best.is_none_or(|(_, b)| v < b) => best = Some((i, v)),
            Some(_) => {}
            None => warnings.push(format!(
                "skipped {{{}}}: {}",
                entry.terms.join(", "),
                entry.error.as_deref().unwrap_or("fit failed")
            )),
        }
    }
    let Some((i, value)) = best else {
        // Even the intercept-only model failed; surface its error.
        fit(data, &spec_of(outcome, family, candidates, &[]))?;
        unreachable!("intercept-only model fitted but was not recorded");
    };
    Ok(SelectionResult {
        method: Method::BestSubsets,
        criterion: criterion.name().into(),
        value,
        chosen: spec_of(outcome, family, candidates, &subsets[i]),
        trace,
        warnings,
        lasso: None,
    })
}

/// Greedy forward (from intercept-only) or backward (from the full model)
/// selection. Each step takes the single move that lowers the criterion
/// most; ties go to the earlier candidate. Stops when no move improves.
pub fn stepwise(
    data: &Dataset,
    outcome: &str,
    candidates: &[Term],
    family: Family,
    direction: Direction,
    criterion: Criterion,
) -> Result<SelectionResult, PredictError> {
    let mut current: Vec<usize> = match direction {
        Direction::Forward => vec![],
        Direction::Backward => (0..candidates.len()).collect(),
    };
    let start_spec = spec_of(outcome, family, candidates, &current);
    let mut value = criterion.of(&fit(data, &start_spec)?);
    let mut trace = vec![TraceEntry {
        stage: "start".into(),
        terms: start_spec.term_labels(),
        value: Some(value),
        lambda: None,
        error: None,
    }];
    let mut warnings = Vec::new();

    for step in 1.. {
        let moves: Vec<Vec<usize>> = match direction {
            Direction::Forward => (0..candidates.len())
                .filter(|i| !current.contains(i))
                .map(|i| {
                    let mut s = current.clone();
                    s.push(i);
                    s.sort_unstable();
                    s
                })
                .collect(),
            Direction::Backward => (0..current.len())
                .map(|k| {
                    let mut s = current.clone();
                    s.remove(k);
                    s
                })
                .collect(),
        };
        if moves.is_empty() {
            break;
        }
        let stage = format!(
            "{} step {step}",
            match direction {
                Direction::Forward => "forward",
                Direction::Backward => "backward",
            }
        );
        let entries: Vec<TraceEntry> = moves
            .par_iter()
            .map(|s| evaluate(data, &spec_of(outcome, family, candidates, s), criterion, &stage))
            .collect();

        let mut best: Option<(usize, f64)> = None;
        for (i, e) in entries.iter().enumerate() {
            match e.value {
                Some(v) if v < value && best.is_none_or(|(_, b)| v < b) => best = Some((i, v)),
                Some(_) => {}
                None => warnings.push(format!(
                    "skipped {{{}}}: {}",
                    e.terms.join(", "),
                    e.error.as_deref().unwrap_or("fit failed")
                )),
            }
        }
        trace.extend(entries);
        match best {
            Some((i, v)) => {
                current = moves[i].clone();
                value = v;
            }
            None => break,
        }
    }

    Ok(SelectionResult {
        method: match direction {
            Direction::Forward => Method::Forward,
            Direction::Backward => Method::Backward,
        },
        criterion: criterion.name().into(),
        value,
        chosen: spec_of(outcome, family, candidates, &current),
        trace,
        warnings,
        lasso: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_enumerated_by_size_then_position() {
        let s = subsets_in_order(3);
        assert_eq!(s.len(), 8);
        assert_eq!(
            s,
            vec![
                vec![],
                vec![0],
                vec![1],
                vec![2],
                vec![0, 1],
                vec![0, 2],
                vec![1, 2],
                vec![0, 1, 2]
            ]
        );
        assert_eq!(subsets_in_order(0), vec![Vec::<usize>::new()]);
    }

    fn toy() -> Dataset {
        let x1: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let x2: Vec<f64> = (0..40).map(|i| (i as f64 * 1.91).cos()).collect();
        let y: Vec<f64> = x1
            .iter()
            .enumerate()
            .map(|(i, v)| 2.0 * v + 0.01 * ((i * 7919 % 13) as f64 - 6.0))
            .collect();
        Dataset::from_numeric([("x1", x1), ("x2", x2), ("y", y)]).unwrap()
    }

    #[test]
    fn zero_candidates_gives_intercept_only() {
        let r = best_subsets(&toy(), "y", &[], Family::Gaussian, Criterion::Bic).unwrap();
        assert!(r.chosen.terms.is_empty());
        assert_eq!(r.trace.len(), 1);
        let f = stepwise(&toy(), "y", &[], Family::Gaussian, Direction::Forward, Criterion::Aic).unwrap();
        assert!(f.chosen.terms.is_empty());
    }

    #[test]
    fn too_many_candidates_rejected() {
        let c: Vec<Term> = (0..21).map(|i| Term::new(format!("x{i}"))).collect();
        assert!(matches!(
            best_subsets(&toy(), "y", &c, Family::Gaussian, Criterion::Aic),
            Err(PredictError::TooManyCandidates { got: 21, .. })
        ));
    }

    #[test]
    fn forward_matches_best_subsets_on_one_candidate() {
        let c = [Term::new("x1")];
        let b = best_subsets(&toy(), "y", &c, Family::Gaussian, Criterion::Aic).unwrap();
        let f = stepwise(&toy(), "y", &c, Family::Gaussian, Direction::Forward, Criterion::Aic).unwrap();
        assert_eq!(b.chosen, f.chosen);
        assert_eq!(b.value, f.value);
    }

    #[test]
    fn failed_fits_are_skipped_with_warning() {
        let ds = toy().with_column("dup", crate::glm::Column::Numeric(toy().numeric("x1").unwrap().to_vec())).unwrap();
        let c = [Term::new("x1"), Term::new("dup")];
        let r = best_subsets(&ds, "y", &c, Family::Gaussian, Criterion::Aic).unwrap();
        assert_eq!(r.trace.len(), 4);
        assert!(r.trace[3].error.is_some());
        assert_eq!(r.warnings.len(), 1);
    }
}
