//! `metrics.json` and `status.json`.

use std::path::Path;

use damas_core::scenarios::{MetricOutcome, Scenario};
use serde::{Deserialize, Serialize};

use crate::atomic::write_atomic;
use crate::error::{Error, Result};

/// One scored expectation. Values are in the metric's own unit: dB for
/// levels and power errors, a count or fraction otherwise. Non-finite values
/// serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub scenario: String,
    pub frequency_hz: f64,
    /// DAMAS iterations, or `null` for the beamform map.
    pub checkpoint: Option<usize>,
    pub metric: String,
    pub value_db: Option<f64>,
    pub expected_db: f64,
    pub tolerance_db: f64,
    pub pass: bool,
}

pub fn metric_records(s: &Scenario, outcomes: &[MetricOutcome]) -> Vec<MetricRecord> {
    outcomes
        .iter()
        .map(|o| MetricRecord {
            scenario: s.name.clone(),
            frequency_hz: s.frequency,
            checkpoint: o.expectation.checkpoint,
            metric: o.expectation.metric.name().to_string(),
            value_db: o.value.is_finite().then_some(o.value),
            expected_db: o.expectation.check.expected(),
            tolerance_db: o.expectation.check.tolerance(),
            pass: o.pass,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Ok,
    Failed,
}

/// Outcome of one frequency or band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub label: String,
    pub frequency_hz: f64,
    pub status: JobState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStatus {
    pub jobs: Vec<JobStatus>,
}

impl RunStatus {
    pub fn all_ok(&self) -> bool {
        self.jobs.iter().all(|j| j.status == JobState::Ok)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Other(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_record_keys() {
        let r = MetricRecord {
            scenario: "s".into(),
            frequency_hz: 1000.0,
            checkpoint: Some(100),
            metric: "total_power_error_db".into(),
            value_db: None,
            expected_db: 0.0,
            tolerance_db: 0.05,
            pass: false,
        };
        let v = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "checkpoint",
                "expected_db",
                "frequency_hz",
                "metric",
                "pass",
                "scenario",
                "tolerance_db",
                "value_db"
            ]
        );
        assert!(v["value_db"].is_null());
    }
}
