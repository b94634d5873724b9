use super::{Result, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Patience-based stopping on validation loss. Only a strict decrease counts
/// as improvement; the run stops once `patience` consecutive epochs pass
/// without one. Epochs are numbered from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    since_best: usize,
    epoch: usize,
    improved: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Result<Self> {
        if patience == 0 {
            return Err(TrainError::Argument("patience must be at least 1".into()));
        }
        Ok(Self {
            patience,
            best: None,
            best_epoch: 0,
            since_best: 0,
            epoch: 0,
            improved: false,
        })
    }

    pub fn update(&mut self, val_loss: f64) -> Result<StopDecision> {
        if val_loss.is_nan() {
            return Err(TrainError::NonFinite {
                epoch: self.epoch + 1,
                what: "validation loss".into(),
            });
        }
        self.epoch += 1;
        self.improved = self.best.is_none_or(|b| val_loss < b);
        if self.improved {
            self.best = Some(val_loss);
            self.best_epoch = self.epoch;
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        Ok(if self.since_best >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        })
    }

    /// Whether the most recent update set a new best.
    pub fn improved(&self) -> bool {
        self.improved
    }

    pub fn best_loss(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn epochs_seen(&self) -> usize {
        self.epoch
    }
}

/// Feeds `losses` through a fresh tracker and returns the stopping epoch (if
/// the rule fired) and the best epoch.
pub fn simulate_early_stopping(losses: &[f64], patience: usize) -> Result<(Option<usize>, usize)> {
    let mut es = EarlyStopping::new(patience)?;
    for &l in losses {
        if es.update(l)? == StopDecision::Stop {
            return Ok((Some(es.epochs_seen()), es.best_epoch()));
        }
    }
    Ok((None, es.best_epoch()))
}
