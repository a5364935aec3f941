//! Structured results of inequality and identity verifiers.

use serde::{Deserialize, Serialize};

/// Outcome of a verifier: observed quantity, optional bound, sample count and seed.
///
/// `pass` is present exactly when `bound` is. Constant-reporting checks carry neither.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub bound: Option<f64>,
    pub observed: f64,
    pub samples: u64,
    pub seed: u64,
    pub pass: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckReport {
    /// A check that passes iff `observed <= bound`.
    pub fn upper(name: &str, observed: f64, bound: f64, samples: u64, seed: u64) -> Self {
        CheckReport {
            name: name.to_string(),
            bound: Some(bound),
            observed,
            samples,
            seed,
            pass: Some(observed <= bound),
            note: None,
        }
    }

    /// A check with an explicit verdict.
    pub fn verdict(name: &str, observed: f64, bound: f64, pass: bool, samples: u64, seed: u64) -> Self {
        CheckReport {
            name: name.to_string(),
            bound: Some(bound),
            observed,
            samples,
            seed,
            pass: Some(pass),
            note: None,
        }
    }

    /// A constant reported for stability tracking; no verdict.
    pub fn reported(name: &str, observed: f64, samples: u64, seed: u64) -> Self {
        CheckReport {
            name: name.to_string(),
            bound: None,
            observed,
            samples,
            seed,
            pass: None,
            note: None,
        }
    }

    /// Hypotheses failed, so the inequality does not apply.
    pub fn not_applicable(name: &str, reason: &str, samples: u64, seed: u64) -> Self {
        CheckReport {
            name: name.to_string(),
            bound: None,
            observed: f64::NAN,
            samples,
            seed,
            pass: None,
            note: Some(format!("not applicable: {reason}")),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.pass == Some(true)
    }

    pub fn is_applicable(&self) -> bool {
        !self
            .note
            .as_deref()
            .is_some_and(|n| n.starts_with("not applicable"))
    }

    /// Merge another report of the same check: worst observed, summed samples.
    pub fn merge_upper(mut self, other: &CheckReport) -> Self {
        self.samples += other.samples;
        if other.observed > self.observed || self.observed.is_nan() {
            self.observed = other.observed;
        }
        self.pass = match (self.pass, other.pass) {
            (Some(a), Some(b)) => Some(a && b),
            (a, None) => a,
            (None, b) => b,
        };
        self
    }
}
