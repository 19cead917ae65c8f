use serde::{Deserialize, Serialize};

use crate::eval::LossKind;

/// Aggregates for one method over all replicates. Fields that do not apply
/// to an experiment are omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossKind>,
    /// Fraction of replicates whose selected model contains the tracked covariate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<f64>,
    /// Among detections with a usable test fit, fraction of intervals excluding 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_denominator: Option<usize>,
    /// Replicates whose test-set refit was impossible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flagged: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proportion_correct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<usize>>,
    /// Count of replicates selecting each candidate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Vec<usize>>,
    /// Replicate-averaged loss curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_curve: Option<Vec<f64>>,
    /// `mean_curve` min-max rescaled to [0, 1].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_rescaled_curve: Option<Vec<f64>>,
    /// Fraction of replicates whose curve never increases.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotone_fraction: Option<f64>,
}

impl MethodSummary {
    pub fn named(method: impl Into<String>) -> Self {
        MethodSummary {
            method: method.into(),
            eps: None,
            loss: None,
            detection: None,
            power: None,
            power_denominator: None,
            flagged: None,
            proportion_correct: None,
            candidates: None,
            histogram: None,
            mean_curve: None,
            mean_rescaled_curve: None,
            monotone_fraction: None,
        }
    }

    /// Every float in the summary.
    pub fn floats(&self) -> Vec<f64> {
        let mut v: Vec<f64> = [self.eps, self.detection, self.power, self.proportion_correct, self.monotone_fraction]
            .into_iter()
            .flatten()
            .collect();
        v.extend(self.mean_curve.iter().flatten());
        v.extend(self.mean_rescaled_curve.iter().flatten());
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub experiment: String,
    pub seed: u64,
    pub n_reps: usize,
    /// Experiment settings as given.
    pub config: serde_json::Value,
    pub methods: Vec<MethodSummary>,
}

impl SimReport {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn is_finite(&self) -> bool {
        self.methods.iter().all(|m| m.floats().iter().all(|v| v.is_finite()))
    }
}

impl SimReport {
    /// Summary for a method label and loss kind.
    pub fn find(&self, method: &str, loss: LossKind) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method && m.loss == Some(loss))
    }
}
