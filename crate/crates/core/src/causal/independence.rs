use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::CausalError;
use crate::dag::{Dag, ImpliedIndependence};
use crate::glm::linalg::Qr;
use crate::glm::Dataset;

/// Fisher z test of one implied conditional independence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceTestResult {
    pub x: String,
    pub y: String,
    pub given: Vec<String>,
    pub partial_correlation: f64,
    /// `atanh(r) * sqrt(n - |given| - 3)`
    pub statistic: f64,
    pub p_value: f64,
    /// `p_value >= alpha`
    pub consistent: bool,
}

/// Tests every independence implied by `dag` (separating sets up to
/// `max_set_size`) for zero partial correlation in `data`.
pub fn test_implied_independencies(
    dag: &Dag,
    data: &Dataset,
    alpha: f64,
    max_set_size: usize,
) -> Result<Vec<IndependenceTestResult>, CausalError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CausalError::InvalidAlpha(alpha));
    }
    let missing: Vec<String> = dag
        .nodes()
        .iter()
        .filter(|v| !data.has_column(v))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(CausalError::MissingColumns(missing));
    }
    let cols: Vec<&[f64]> = dag
        .nodes()
        .iter()
        .map(|v| data.numeric(v).map_err(|_| CausalError::NotNumeric(v.clone())))
        .collect::<Result<_, _>>()?;

    let triples = dag.implied_independencies(max_set_size);
    let n = data.n_rows();
    if let Some(t) = triples.iter().find(|t| n <= t.given.len() + 3) {
        return Err(CausalError::InsufficientDf { n, k: t.given.len() });
    }

    let cov = covariance(&cols);
    let index = |name: &str| dag.nodes().iter().position(|v| v == name).expect("dag node");
    let normal = Normal::standard();
    Ok(triples
        .par_iter()
        .map(|t| {
            let r = partial_correlation(&cov, t, &index);
            let df = (n - t.given.len() - 3) as f64;
            let statistic = r.clamp(-1.0 + 1e-16, 1.0 - 1e-16).atanh() * df.sqrt();
            let p_value = (2.0 * normal.sf(statistic.abs())).min(1.0);
            IndependenceTestResult {
                x: t.x.clone(),
                y: t.y.clone(),
                given: t.given.clone(),
                partial_correlation: r,
                statistic,
                p_value,
                consistent: p_value >= alpha,
            }
        })
        .collect())
}

fn covariance(cols: &[&[f64]]) -> Array2<f64> {
    let k = cols.len();
    let n = cols.first().map_or(0, |c| c.len()) as f64;
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let mut cov = Array2::zeros((k, k));
    for a in 0..k {
        for b in a..k {
            let s: f64 = cols[a]
                .iter()
                .zip(cols[b])
                .map(|(u, v)| (u - means[a]) * (v - means[b]))
                .sum();
            cov[[a, b]] = s / (n - 1.0);
            cov[[b, a]] = cov[[a, b]];
        }
    }
    cov
}

/// Partial correlation of `x` and `y` given `given`, from the inverse of the
/// covariance submatrix over `{x, y} + given`.
fn partial_correlation(
    cov: &Array2<f64>,
    t: &ImpliedIndependence,
    index: &impl Fn(&str) -> usize,
) -> f64 {
    let vars: Vec<usize> = [t.x.as_str(), t.y.as_str()]
        .into_iter()
        .chain(t.given.iter().map(String::as_str))
        .map(index)
        .collect();
    let m = vars.len();
    let sub = Array2::from_shape_fn((m, m), |(i, j)| cov[[vars[i], vars[j]]]);
    let qr = Qr::new(sub.view());
    // First two columns of the precision matrix.
    let mut e0 = Array1::zeros(m);
    e0[0] = 1.0;
    let mut e1 = Array1::zeros(m);
    e1[1] = 1.0;
    let p0 = qr.solve(e0.view());
    let p1 = qr.solve(e1.view());
    -p0[1] / (p0[0] * p1[1]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::parse_dag;

    fn residuals(v: &[f64], z: &[f64]) -> Vec<f64> {
        let n = v.len() as f64;
        let (mv, mz) = (v.iter().sum::<f64>() / n, z.iter().sum::<f64>() / n);
        let szz: f64 = z.iter().map(|a| (a - mz).powi(2)).sum();
        let szv: f64 = z.iter().zip(v).map(|(a, b)| (a - mz) * (b - mv)).sum();
        let slope = szv / szz;
        v.iter().zip(z).map(|(b, a)| b - mv - slope * (a - mz)).collect()
    }

    #[test]
    fn partial_correlation_matches_residual_correlation() {
        let x = [0.3, -1.2, 2.2, 0.1, -0.7, 1.5, 0.9];
        let z = [1.0, 0.4, -0.3, 2.0, -1.1, 0.6, 0.2];
        let y = [1.1, -0.2, 0.5, 2.4, -1.9, 1.0, 0.8];
        let (rx, ry) = (residuals(&x, &z), residuals(&y, &z));
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
        let oracle = dot(&rx, &ry) / (dot(&rx, &rx) * dot(&ry, &ry)).sqrt();

        let cov = covariance(&[&x, &y, &z]);
        let t = ImpliedIndependence {
            x: "x".into(),
            y: "y".into(),
            given: vec!["z".into()],
        };
        let idx = |s: &str| ["x", "y", "z"].iter().position(|v| *v == s).unwrap();
        assert!((partial_correlation(&cov, &t, &idx) - oracle).abs() < 1e-12);
    }

    #[test]
    fn complete_graph_gives_no_tests() {
        let dag = parse_dag("dag { A -> B  A -> C  B -> C }").unwrap();
        let data = Dataset::from_numeric([
            ("A", vec![1.0, 2.0, 3.0]),
            ("B", vec![1.0, 0.0, 3.0]),
            ("C", vec![2.0, 2.0, 1.0]),
        ])
        .unwrap();
        assert!(test_implied_independencies(&dag, &data, 0.05, 3).unwrap().is_empty());
    }

    #[test]
    fn too_few_rows() {
        let dag = parse_dag("dag { A -> B -> C }").unwrap();
        let data = Dataset::from_numeric([
            ("A", vec![1.0, 2.0, 3.0, 4.0]),
            ("B", vec![1.0, 0.0, 3.0, 1.0]),
            ("C", vec![2.0, 2.0, 1.0, 0.0]),
        ])
        .unwrap();
        assert!(matches!(
            test_implied_independencies(&dag, &data, 0.05, 3),
            Err(CausalError::InsufficientDf { n: 4, k: 1 })
        ));
    }
}
