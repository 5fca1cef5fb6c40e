//! Validation-loss early stopping.
//!
//! "Did not decrease" means: no strict improvement over the running best
//! validation loss. Training stops once `patience` consecutive epochs
//! fail to improve it.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    NoImprovement { waited: u32 },
    Stop,
}

#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: u32,
    best: Option<f64>,
    best_epoch: u32,
    wait: u32,
}

impl EarlyStopping {
    pub fn new(patience: u32) -> Self {
        EarlyStopping {
            patience,
            best: None,
            best_epoch: 0,
            wait: 0,
        }
    }

    /// Feed one epoch's validation loss; epochs are 1-based.
    pub fn observe(&mut self, epoch: u32, val_loss: f64) -> StopDecision {
        let improved = match self.best {
            None => true,
            Some(best) => val_loss < best,
        };
        if improved {
            self.best = Some(val_loss);
            self.best_epoch = epoch;
            self.wait = 0;
            StopDecision::Improved
        } else {
            self.wait += 1;
            if self.wait >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::NoImprovement { waited: self.wait }
            }
        }
    }

    pub fn best(&self) -> Option<(u32, f64)> {
        self.best.map(|loss| (self.best_epoch, loss))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Runs the state machine over a scripted loss sequence; returns the
    /// 1-based epoch it stopped after (or None) and the best epoch.
    fn run(losses: &[f64], patience: u32) -> (Option<u32>, u32) {
        let mut es = EarlyStopping::new(patience);
        for (i, &loss) in losses.iter().enumerate() {
            let epoch = i as u32 + 1;
            if es.observe(epoch, loss) == StopDecision::Stop {
                return (Some(epoch), es.best().unwrap().0);
            }
        }
        (None, es.best().unwrap().0)
    }

    #[test]
    fn plateau_after_improvement_stops_at_epoch_twelve() {
        // 1.0, 0.9, then 0.95 forever: epochs 3..=12 are ten consecutive
        // non-improving epochs, so training stops after epoch 12.
        let mut losses = vec![1.0, 0.9];
        losses.extend(std::iter::repeat(0.95).take(20));
        let (stopped, best) = run(&losses, 10);
        assert_eq!(stopped, Some(12));
        assert_eq!(best, 2);
    }

    #[test]
    fn strictly_decreasing_never_stops() {
        let losses: Vec<f64> = (0..50).map(|i| 1.0 - i as f64 * 0.01).collect();
        let (stopped, best) = run(&losses, 10);
        assert_eq!(stopped, None);
        assert_eq!(best, 50);
    }

    #[test]
    fn patience_boundary_is_exact() {
        // Improvement at epoch 1, flat afterwards: patience 3 consumes
        // exactly three flat epochs.
        let (stopped, _) = run(&[1.0, 1.0, 1.0, 1.0], 3);
        assert_eq!(stopped, Some(4));
        // One fewer flat epoch does not stop...
        let (stopped, _) = run(&[1.0, 1.0, 1.0], 3);
        assert_eq!(stopped, None);
        // ...and patience one lower stops one epoch earlier.
        let (stopped, _) = run(&[1.0, 1.0, 1.0, 1.0], 2);
        assert_eq!(stopped, Some(3));
    }

    #[test]
    fn equal_loss_is_not_an_improvement() {
        let mut es = EarlyStopping::new(2);
        assert_eq!(es.observe(1, 0.5), StopDecision::Improved);
        assert_eq!(es.observe(2, 0.5), StopDecision::NoImprovement { waited: 1 });
        assert_eq!(es.observe(3, 0.5), StopDecision::Stop);
        assert_eq!(es.best(), Some((1, 0.5)));
    }

    #[test]
    fn late_improvement_resets_the_counter() {
        let mut es = EarlyStopping::new(3);
        es.observe(1, 1.0);
        es.observe(2, 1.1);
        es.observe(3, 1.2);
        assert_eq!(es.observe(4, 0.8), StopDecision::Improved);
        assert_eq!(es.observe(5, 0.9), StopDecision::NoImprovement { waited: 1 });
        assert_eq!(es.best(), Some((4, 0.8)));
    }
}
