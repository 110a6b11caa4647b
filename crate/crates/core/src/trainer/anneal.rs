use serde::{Deserialize, Serialize};

/// How the learning rate reacts to a worsening validation perplexity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anneal {
    /// `lr · lr_decay`
    #[default]
    Multiply,
    /// `lr · ½`
    Halve,
    /// `lr0 · exp(-c)` after the `c`-th worsening.
    Exp,
}

/// Rounds to 15 significant digits, so decimal rates stay decimal:
/// `10 · 0.3 · 0.3` is `0.9`, not `0.8999999999999999`.
fn snap(x: f64) -> f64 {
    format!("{x:.14e}").parse().unwrap_or(x)
}

/// `lr · decay` if the latest validation perplexity is worse than the one
/// before it, else `lr`.
pub fn anneal_lr(val_history: &[f64], lr: f64, decay: f64) -> f64 {
    match val_history {
        [.., prev, last] if last > prev => snap(lr * decay),
        _ => lr,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub mode: Anneal,
    pub lr0: f64,
    pub decay: f64,
    pub lr: f64,
    /// Number of worsenings seen so far.
    pub events: u32,
}

impl LrSchedule {
    pub fn new(mode: Anneal, lr0: f64, decay: f64) -> Self {
        LrSchedule {
            mode,
            lr0,
            decay,
            lr: lr0,
            events: 0,
        }
    }

    /// Updates the rate after a new validation result has been appended.
    pub fn observe(&mut self, val_history: &[f64]) -> f64 {
        let factor = match self.mode {
            Anneal::Multiply | Anneal::Exp => self.decay,
            Anneal::Halve => 0.5,
        };
        let next = anneal_lr(val_history, self.lr, factor);
        if next != self.lr {
            self.events += 1;
            self.lr = match self.mode {
                Anneal::Exp => snap(self.lr0 * (-(self.events as f64)).exp()),
                _ => next,
            };
        }
        self.lr
    }
}
