use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    /// `patience` validations in a row without improvement.
    EarlyStop,
    MaxUpdates,
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum LogEvent {
    Update {
        update: usize,
        epoch: usize,
        batch: usize,
        loss: f64,
        /// Gradient norm before clipping.
        grad_norm: f64,
        /// Norm of the gradient actually applied.
        applied_norm: f64,
    },
    Validation {
        update: usize,
        metric: f64,
        improved: bool,
    },
    Stop {
        update: usize,
        reason: StopReason,
        best_update: Option<usize>,
        best_metric: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub seed: u64,
    pub events: Vec<LogEvent>,
    pub stop_reason: Option<StopReason>,
    pub best_metric: Option<f64>,
    pub best_update: Option<usize>,
    pub best_checkpoint: Option<PathBuf>,
}

impl RunLog {
    pub fn new(seed: u64) -> Self {
        RunLog {
            seed,
            events: Vec::new(),
            stop_reason: None,
            best_metric: None,
            best_update: None,
            best_checkpoint: None,
        }
    }

    pub fn losses(&self) -> Vec<f64> {
        self.events
            .iter()
            .filter_map(|e| match e {
                LogEvent::Update { loss, .. } => Some(*loss),
                _ => None,
            })
            .collect()
    }

    /// `(update, metric)` for every validation.
    pub fn validations(&self) -> Vec<(usize, f64)> {
        self.events
            .iter()
            .filter_map(|e| match e {
                LogEvent::Validation { update, metric, .. } => Some((*update, *metric)),
                _ => None,
            })
            .collect()
    }

    pub fn updates(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, LogEvent::Update { .. })).count()
    }

    /// One JSON object per event.
    pub fn to_jsonl(&self) -> String {
        self.events.iter().map(|e| serde_json::to_string(e).expect("event serializes") + "\n").collect()
    }

    pub fn from_jsonl(seed: u64, text: &str) -> Result<Self> {
        let mut log = RunLog::new(seed);
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let e: LogEvent = serde_json::from_str(line)?;
            if let LogEvent::Stop { reason, best_update, best_metric, .. } = &e {
                log.stop_reason = Some(*reason);
                log.best_update = *best_update;
                log.best_metric = *best_metric;
            }
            log.events.push(e);
        }
        Ok(log)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let mut log = RunLog::new(3);
        log.events.push(LogEvent::Update {
            update: 1,
            epoch: 0,
            batch: 0,
            loss: 2.5,
            grad_norm: 7.0,
            applied_norm: 5.0,
        });
        log.events.push(LogEvent::Validation { update: 1, metric: 0.25, improved: true });
        log.events.push(LogEvent::Stop {
            update: 1,
            reason: StopReason::MaxUpdates,
            best_update: Some(1),
            best_metric: Some(0.25),
        });
        log.stop_reason = Some(StopReason::MaxUpdates);
        log.best_update = Some(1);
        log.best_metric = Some(0.25);
        let text = log.to_jsonl();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with(r#"{"event":"update""#));
        assert_eq!(RunLog::from_jsonl(3, &text).unwrap(), log);
        assert_eq!(log.losses(), vec![2.5]);
        assert_eq!(log.validations(), vec![(1, 0.25)]);
    }
}
