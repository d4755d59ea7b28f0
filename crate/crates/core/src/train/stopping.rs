/// Outcome of observing one epoch's validation error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    NoImprovement,
    Stop,
}

/// Stops once `patience` consecutive epochs fail to strictly decrease the
/// best validation error.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f32,
    best_epoch: Option<usize>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f32::INFINITY,
            best_epoch: None,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val: f32) -> Verdict {
        if val < self.best {
            self.best = val;
            self.best_epoch = Some(epoch);
            self.stale = 0;
            return Verdict::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            Verdict::Stop
        } else {
            Verdict::NoImprovement
        }
    }

    pub fn best(&self) -> Option<(usize, f32)> {
        self.best_epoch.map(|e| (e, self.best))
    }
}
