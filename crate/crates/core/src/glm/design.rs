use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::data::{Column, Dataset};
use super::{Family, GlmError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    Identity,
    Log,
    /// Centre and scale by the training mean and standard deviation.
    Standardize,
}

/// One covariate of a model: a source column and how it enters the linear
/// predictor. Categorical columns expand to reference-coded indicators.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term {
    pub column: String,
    #[serde(default)]
    pub transform: Transform,
}

impl Term {
    pub fn new(column: impl Into<String>) -> Self {
        Self {
            column: column.into(),
            transform: Transform::Identity,
        }
    }

    pub fn log(column: impl Into<String>) -> Self {
        Self {
            column: column.into(),
            transform: Transform::Log,
        }
    }

    pub fn standardized(column: impl Into<String>) -> Self {
        Self {
            column: column.into(),
            transform: Transform::Standardize,
        }
    }

    /// Display label, e.g. `x`, `log(x)`, `z(x)`.
    pub fn label(&self) -> String {
        match self.transform {
            Transform::Identity => self.column.clone(),
            Transform::Log => format!("log({})", self.column),
            Transform::Standardize => format!("z({})", self.column),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Term {
    type Err = String;

    /// Parses `x`, `log(x)` or `z(x)`.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let wrapped = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_suffix(')'))
                .map(str::trim)
                .filter(|c| !c.is_empty())
        };
        if let Some(c) = wrapped("log(") {
            Ok(Term::log(c))
        } else if let Some(c) = wrapped("z(") {
            Ok(Term::standardized(c))
        } else if s.is_empty() || s.contains(['(', ')']) {
            Err(format!("cannot parse term '{s}'"))
        } else {
            Ok(Term::new(s))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub outcome: String,
    pub terms: Vec<Term>,
    pub family: Family,
}

impl ModelSpec {
    pub fn new(outcome: impl Into<String>, terms: Vec<Term>, family: Family) -> Self {
        Self {
            outcome: outcome.into(),
            terms,
            family,
        }
    }

    pub fn term_labels(&self) -> Vec<String> {
        self.terms.iter().map(Term::label).collect()
    }

    /// `y ~ a + log(b)`, or `y ~ 1` for the intercept-only model.
    pub fn formula(&self) -> String {
        if self.terms.is_empty() {
            format!("{} ~ 1", self.outcome)
        } else {
            format!("{} ~ {}", self.outcome, self.term_labels().join(" + "))
        }
    }
}

/// How one term is turned into design columns; fixed from training data so
/// new data is encoded identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TermEncoder {
    Numeric {
        term: Term,
        center: f64,
        scale: f64,
    },
    Categorical {
        column: String,
        /// All training levels; the first is the reference.
        levels: Vec<String>,
    },
}

impl TermEncoder {
    pub fn column_names(&self) -> Vec<String> {
        match self {
            TermEncoder::Numeric { term, .. } => vec![term.label()],
            TermEncoder::Categorical { column, levels } => levels[1..]
                .iter()
                .map(|l| format!("{column}={l}"))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignLayout {
    pub encoders: Vec<TermEncoder>,
}

impl DesignLayout {
    /// Design column names, intercept first.
    pub fn column_names(&self) -> Vec<String> {
        std::iter::once("(Intercept)".to_string())
            .chain(self.encoders.iter().flat_map(TermEncoder::column_names))
            .collect()
    }

    /// Encodes rows of `data` with the stored transforms.
    pub fn encode(&self, data: &Dataset) -> Result<Array2<f64>, GlmError> {
        let n = data.n_rows();
        let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
        for enc in &self.encoders {
            match enc {
                TermEncoder::Numeric {
                    term,
                    center,
                    scale,
                } => {
                    let raw = data.numeric(&term.column)?;
                    let values = match term.transform {
                        Transform::Identity => raw.to_vec(),
                        Transform::Log => log_column(&term.column, raw)?,
                        Transform::Standardize => raw.iter().map(|v| (v - center) / scale).collect(),
                    };
                    cols.push(values);
                }
                TermEncoder::Categorical { column, levels } => {
                    let (data_levels, codes) = match data.column(column)? {
                        Column::Categorical { levels, codes } => (levels, codes),
                        Column::Numeric(_) => {
                            return Err(GlmError::Shape(format!(
                                "column {column} was categorical when the model was built"
                            )))
                        }
                    };
                    // Map the new data's level codes onto the training levels.
                    let mut map = Vec::with_capacity(data_levels.len());
                    for l in data_levels {
                        match levels.iter().position(|t| t == l) {
                            Some(i) => map.push(i),
                            None => {
                                return Err(GlmError::UnseenLevel {
                                    column: column.clone(),
                                    level: l.clone(),
                                })
                            }
                        }
                    }
                    for level in 1..levels.len() {
                        cols.push(codes.iter().map(|&c| (map[c] == level) as u8 as f64).collect());
                    }
                }
            }
        }
        let p = cols.len();
        Ok(Array2::from_shape_fn((n, p), |(i, j)| cols[j][i]))
    }
}

/// Design matrix with intercept, response vector and the layout that
/// produced them.
#[derive(Debug, Clone)]
pub struct Design {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub columns: Vec<String>,
    pub layout: DesignLayout,
    pub outcome: String,
}

impl Design {
    /// Wraps a raw matrix (intercept column included by the caller). The
    /// layout treats each non-intercept column as an identity term named by
    /// `columns`.
    pub fn from_matrix(
        x: Array2<f64>,
        y: Array1<f64>,
        columns: Vec<String>,
    ) -> Result<Self, GlmError> {
        if x.nrows() != y.len() || x.ncols() != columns.len() {
            return Err(GlmError::Shape(format!(
                "design {}x{} with {} responses and {} names",
                x.nrows(),
                x.ncols(),
                y.len(),
                columns.len()
            )));
        }
        let layout = DesignLayout {
            encoders: columns[1..]
                .iter()
                .map(|c| TermEncoder::Numeric {
                    term: Term::new(c.clone()),
                    center: 0.0,
                    scale: 1.0,
                })
                .collect(),
        };
        Ok(Self {
            x,
            y,
            columns,
            layout,
            outcome: "y".into(),
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

fn log_column(column: &str, raw: &[f64]) -> Result<Vec<f64>, GlmError> {
    raw.iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > 0.0 {
                Ok(v.ln())
            } else {
                Err(GlmError::NonPositiveLog {
                    column: column.to_string(),
                    row: i + 1,
                    value: v,
                })
            }
        })
        .collect()
}

/// Builds the design matrix (leading intercept, terms in spec order) and
/// response for `spec`, validating the response against the family.
pub fn build_design(data: &Dataset, spec: &ModelSpec) -> Result<Design, GlmError> {
    if spec.terms.iter().any(|t| t.column == spec.outcome) {
        return Err(GlmError::OutcomeInTerms(spec.outcome.clone()));
    }
    let y = data.numeric(&spec.outcome)?;
    if let Some(row) = y.iter().position(|&v| !spec.family.valid_response(v)) {
        return Err(GlmError::InvalidResponse {
            column: spec.outcome.clone(),
            family: spec.family,
            row: row + 1,
            value: y[row],
        });
    }

    let mut encoders = Vec::with_capacity(spec.terms.len());
    for term in &spec.terms {
        match data.column(&term.column)? {
            Column::Numeric(raw) => {
                let (center, scale) = match term.transform {
                    Transform::Standardize => {
                        let n = raw.len() as f64;
                        let mean = raw.iter().sum::<f64>() / n;
                        let var = raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                        if var <= 0.0 {
                            return Err(GlmError::ZeroVariance(term.column.clone()));
                        }
                        (mean, var.sqrt())
                    }
                    Transform::Log => {
                        log_column(&term.column, raw)?;
                        (0.0, 1.0)
                    }
                    Transform::Identity => (0.0, 1.0),
                };
                encoders.push(TermEncoder::Numeric {
                    term: term.clone(),
                    center,
                    scale,
                });
            }
            Column::Categorical { levels, .. } => {
                if term.transform != Transform::Identity {
                    return Err(GlmError::CategoricalTransform(term.label()));
                }
                encoders.push(TermEncoder::Categorical {
                    column: term.column.clone(),
                    levels: levels.clone(),
                });
            }
        }
    }
    let layout = DesignLayout { encoders };
    let x = layout.encode(data)?;
    Ok(Design {
        x,
        y: Array1::from(y.to_vec()),
        columns: layout.column_names(),
        layout,
        outcome: spec.outcome.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> Dataset {
        Dataset::new(
            vec!["x".into(), "c".into(), "y".into(), "e".into()],
            vec![
                Column::Numeric(vec![1.0, 2.0, 3.0]),
                Column::categorical(&["a", "b", "c"]),
                Column::Numeric(vec![0.0, 1.0, 1.0]),
                Column::Numeric(vec![1.0, std::f64::consts::E, std::f64::consts::E.powi(2)]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn identity_column_copies_values() {
        let d = build_design(&data(), &ModelSpec::new("y", vec![Term::new("x")], Family::Gaussian)).unwrap();
        assert_eq!(d.columns, vec!["(Intercept)", "x"]);
        assert_eq!(d.x.column(0).to_vec(), vec![1.0; 3]);
        assert_eq!(d.x.column(1).to_vec(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn categorical_expands_to_indicators() {
        let d = build_design(&data(), &ModelSpec::new("y", vec![Term::new("c")], Family::Gaussian)).unwrap();
        assert_eq!(d.columns, vec!["(Intercept)", "c=b", "c=c"]);
        assert_eq!(d.x.column(1).to_vec(), vec![0.0, 1.0, 0.0]);
        assert_eq!(d.x.column(2).to_vec(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn log_transform() {
        let d = build_design(&data(), &ModelSpec::new("y", vec![Term::log("e")], Family::Gaussian)).unwrap();
        assert_eq!(d.columns[1], "log(e)");
        for (got, want) in d.x.column(1).iter().zip([0.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn error_paths() {
        let ds = data();
        let spec = |terms, fam| ModelSpec::new("y", terms, fam);
        assert!(matches!(
            build_design(&ds, &spec(vec![Term::log("y")], Family::Gaussian)),
            Err(GlmError::OutcomeInTerms(_))
        ));
        let with_zero = ds.clone().with_column("z", Column::Numeric(vec![1.0, 0.0, 2.0])).unwrap();
        assert!(matches!(
            build_design(&with_zero, &spec(vec![Term::log("z")], Family::Gaussian)),
            Err(GlmError::NonPositiveLog { row: 2, .. })
        ));
        assert!(matches!(
            build_design(&ds, &spec(vec![Term::new("nope")], Family::Gaussian)),
            Err(GlmError::UnknownColumn(_))
        ));
        let bad = ModelSpec::new("x", vec![], Family::Binomial);
        assert!(matches!(build_design(&ds, &bad), Err(GlmError::InvalidResponse { row: 2, .. })));
        assert!(matches!(
            build_design(&ds, &spec(vec![Term::log("c")], Family::Gaussian)),
            Err(GlmError::CategoricalTransform(_))
        ));
    }

    #[test]
    fn unseen_level_on_encode() {
        let ds = data();
        let d = build_design(&ds, &ModelSpec::new("y", vec![Term::new("c")], Family::Gaussian)).unwrap();
        let other = ds.with_column("c", Column::categorical(&["a", "q", "b"])).unwrap();
        assert!(matches!(d.layout.encode(&other), Err(GlmError::UnseenLevel { .. })));
    }

    #[test]
    fn term_parsing() {
        assert_eq!("log(ddimer)".parse::<Term>().unwrap(), Term::log("ddimer"));
        assert_eq!(" z(age) ".parse::<Term>().unwrap(), Term::standardized("age"));
        assert_eq!("site".parse::<Term>().unwrap(), Term::new("site"));
        assert!("log()".parse::<Term>().is_err());
    }
}
