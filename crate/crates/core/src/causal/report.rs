use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::CausalError;
use crate::glm::Family;

pub const CAUSAL_LABEL: &str = "total causal effect";
pub const NON_CAUSAL_LABEL: &str = "adjustment \u{2014} not causally interpretable";

/// The exposure coefficient on the link scale with its 95% Wald interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `identity`, `log-odds` or `log-rate`.
    pub scale: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub estimate: f64,
    pub se: f64,
    pub label: String,
}

/// Result of a total-effect estimation. Field order is the JSON order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub exposure: String,
    pub outcome: String,
    pub effect: Effect,
    pub adjustment_set: Vec<String>,
    pub non_causal_coefficients: IndexMap<String, Coefficient>,
    pub family: Family,
    pub dag_fingerprint: String,
    pub warnings: Vec<String>,
}

impl EffectReport {
    /// Checks that exactly one coefficient carries the causal label and all
    /// others carry the non-causal label.
    pub fn validate(&self) -> Result<(), CausalError> {
        if self.effect.label != CAUSAL_LABEL {
            return Err(CausalError::InvalidReport(format!(
                "effect label must be '{CAUSAL_LABEL}', found '{}'",
                self.effect.label
            )));
        }
        if let Some((name, c)) = self
            .non_causal_coefficients
            .iter()
            .find(|(_, c)| c.label != NON_CAUSAL_LABEL)
        {
            return Err(CausalError::InvalidReport(format!(
                "coefficient {name} has label '{}'",
                c.label
            )));
        }
        if self.non_causal_coefficients.contains_key(&self.exposure) {
            return Err(CausalError::InvalidReport(format!(
                "exposure {} listed among non-causal coefficients",
                self.exposure
            )));
        }
        Ok(())
    }

    /// Number of coefficients labelled as causal; always one for a valid
    /// report.
    pub fn causal_label_count(&self) -> usize {
        usize::from(self.effect.label == CAUSAL_LABEL)
            + self
                .non_causal_coefficients
                .values()
                .filter(|c| c.label == CAUSAL_LABEL)
                .count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, CausalError> {
        let report: Self =
            serde_json::from_str(text).map_err(|e| CausalError::InvalidReport(e.to_string()))?;
        report.validate()?;
        Ok(report)
    }

    /// Human-readable report. The causal estimate comes first; other
    /// coefficients appear only under the non-causal heading.
    pub fn render_text(&self) -> String {
        let e = &self.effect;
        let mut out = String::new();
        let _ = writeln!(out, "Exposure: {}", self.exposure);
        let _ = writeln!(out, "Outcome:  {}", self.outcome);
        let _ = writeln!(
            out,
            "{}: {:.6} (SE {:.6}; 95% CI {:.6} to {:.6}; {} scale)",
            CAUSAL_LABEL, e.estimate, e.se, e.ci_low, e.ci_high, e.scale
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "Adjustment set: {{{}}}", self.adjustment_set.join(", "));
        let _ = writeln!(out, "Family: {} ({} link)", self.family, self.family.link_name());
        let _ = writeln!(out, "DAG fingerprint: {}", self.dag_fingerprint);
        let _ = writeln!(out);
        let _ = writeln!(out, "Other coefficients ({NON_CAUSAL_LABEL}):");
        let width = self
            .non_causal_coefficients
            .keys()
            .map(|k| k.len())
            .max()
            .unwrap_or(0);
        for (name, c) in &self.non_causal_coefficients {
            let _ = writeln!(out, "  {name:<width$}  {:>12.6}  (SE {:.6})", c.estimate, c.se);
        }
        if !self.warnings.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "Warnings:");
            for w in &self.warnings {
                let _ = writeln!(out, "  - {w}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> EffectReport {
        let mut nc = IndexMap::new();
        nc.insert(
            "(Intercept)".to_string(),
            Coefficient {
                estimate: 0.1,
                se: 0.01,
                label: NON_CAUSAL_LABEL.into(),
            },
        );
        nc.insert(
            "C".to_string(),
            Coefficient {
                estimate: 0.8,
                se: 0.02,
                label: NON_CAUSAL_LABEL.into(),
            },
        );
        EffectReport {
            exposure: "X".into(),
            outcome: "Y".into(),
            effect: Effect {
                estimate: 0.3,
                se: 0.01,
                ci_low: 0.28,
                ci_high: 0.32,
                scale: "identity".into(),
                label: CAUSAL_LABEL.into(),
            },
            adjustment_set: vec!["C".into()],
            non_causal_coefficients: nc,
            family: Family::Gaussian,
            dag_fingerprint: "abc".into(),
            warnings: vec![],
        }
    }

    #[test]
    fn one_causal_line() {
        let text = report().render_text();
        assert_eq!(text.lines().filter(|l| l.contains(CAUSAL_LABEL)).count(), 1);
        assert!(text.contains("not causally interpretable"));
        assert!(!text.contains("Warnings"));
    }

    #[test]
    fn warnings_section_present_when_needed() {
        let mut r = report();
        r.warnings.push("something".into());
        assert!(r.render_text().contains("Warnings:\n  - something"));
    }

    #[test]
    fn json_round_trip_and_field_order() {
        let r = report();
        let json = r.to_json();
        assert_eq!(EffectReport::from_json(&json).unwrap(), r);
        let keys = [
            "\"exposure\"",
            "\"outcome\"",
            "\"effect\"",
            "\"adjustment_set\"",
            "\"non_causal_coefficients\"",
            "\"family\"",
            "\"dag_fingerprint\"",
            "\"warnings\"",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tampered_labels_rejected() {
        let mut r = report();
        r.non_causal_coefficients.get_mut("C").unwrap().label = CAUSAL_LABEL.into();
        assert_eq!(r.causal_label_count(), 2);
        assert!(EffectReport::from_json(&r.to_json()).is_err());
    }
}
