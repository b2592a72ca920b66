use serde::{Deserialize, Serialize};
use std::fmt;

/// How `passed` was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `passed ⇔ p_value > threshold`.
    Statistical,
    /// `passed ⇔ max_abs_error < threshold`.
    Numeric,
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub kind: CheckKind,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_abs_error: Option<f64>,
    pub n_samples: u64,
    pub passed: bool,
    pub threshold: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl TestReport {
    pub fn statistical(name: impl Into<String>, statistic: f64, p_value: f64, n_samples: u64, threshold: f64, seed: u64) -> Self {
        Self {
            name: name.into(),
            kind: CheckKind::Statistical,
            statistic,
            p_value: Some(p_value),
            max_abs_error: None,
            n_samples,
            passed: p_value > threshold,
            threshold,
            seed,
            note: None,
        }
    }

    pub fn numeric(name: impl Into<String>, statistic: f64, max_abs_error: f64, n_samples: u64, threshold: f64, seed: u64) -> Self {
        Self {
            name: name.into(),
            kind: CheckKind::Numeric,
            statistic,
            p_value: None,
            max_abs_error: Some(max_abs_error),
            n_samples,
            passed: max_abs_error < threshold,
            threshold,
            seed,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// The p-value or error the pass decision was made on.
    pub fn decision_value(&self) -> f64 {
        match self.kind {
            CheckKind::Statistical => self.p_value.unwrap_or(f64::NAN),
            CheckKind::Numeric => self.max_abs_error.unwrap_or(f64::NAN),
        }
    }

    /// Re-decides a statistical report at a new (e.g. Bonferroni) threshold.
    pub fn at_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self.passed = match self.kind {
            CheckKind::Statistical => self.p_value.is_some_and(|p| p > threshold),
            CheckKind::Numeric => self.max_abs_error.is_some_and(|e| e < threshold),
        };
        self
    }
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        match self.kind {
            CheckKind::Statistical => write!(
                f,
                "{verdict} {}: stat={:.6} p={:.4e} (> {:.2e}) n={}",
                self.name,
                self.statistic,
                self.decision_value(),
                self.threshold,
                self.n_samples
            ),
            CheckKind::Numeric => write!(
                f,
                "{verdict} {}: value={:.6e} err={:.3e} (< {:.3e}) n={}",
                self.name,
                self.statistic,
                self.decision_value(),
                self.threshold,
                self.n_samples
            ),
        }
    }
}

/// CSV summary rows: `name,statistic,p_or_err,passed`.
pub fn csv_summary(reports: &[TestReport]) -> String {
    let mut out = String::from("name,statistic,p_or_err,passed\n");
    for r in reports {
        out.push_str(&format!("{},{},{},{}\n", r.name, r.statistic, r.decision_value(), r.passed));
    }
    out
}
