/// Outcome of feeding one epoch's loss to a [`Plateau`] tracker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateauEvent {
    Improved,
    /// Epochs since the last improvement, below the patience.
    Waiting(usize),
    /// Patience used up; the counter restarts.
    Exhausted,
}

/// Counts epochs without a relative improvement larger than `min_rel`.
///
/// Drives both the learning-rate decay (on training loss) and early stopping
/// (on validation loss).
#[derive(Debug, Clone, PartialEq)]
pub struct Plateau {
    patience: usize,
    min_rel: f64,
    best: f64,
    wait: usize,
}

impl Plateau {
    pub fn new(patience: usize, min_rel: f64) -> Self {
        Self {
            patience: patience.max(1),
            min_rel,
            best: f64::INFINITY,
            wait: 0,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn observe(&mut self, value: f64) -> PlateauEvent {
        let threshold = if self.best.is_finite() {
            self.best - self.min_rel * self.best.abs()
        } else {
            f64::INFINITY
        };
        if value < threshold {
            self.best = value;
            self.wait = 0;
            return PlateauEvent::Improved;
        }
        self.wait += 1;
        if self.wait >= self.patience {
            self.wait = 0;
            PlateauEvent::Exhausted
        } else {
            PlateauEvent::Waiting(self.wait)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhausts_after_patience() {
        let mut p = Plateau::new(3, 1e-6);
        assert_eq!(p.observe(1.0), PlateauEvent::Improved);
        assert_eq!(p.observe(1.0), PlateauEvent::Waiting(1));
        assert_eq!(p.observe(0.9999999999), PlateauEvent::Waiting(2));
        assert_eq!(p.observe(2.0), PlateauEvent::Exhausted);
        assert_eq!(p.observe(1.0), PlateauEvent::Waiting(1));
        assert_eq!(p.observe(0.5), PlateauEvent::Improved);
        assert_eq!(p.best(), 0.5);
    }
}
