use serde::{Deserialize, Serialize};

use crate::numerics::sigmoid;

/// Steepness of the sigmoid curriculum.
pub const SIGMOID_STEEPNESS: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Linear,
    Sigmoid,
    #[serde(alias = "exp")]
    Exponential,
}

impl std::str::FromStr for ScheduleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(ScheduleKind::Linear),
            "sigmoid" => Ok(ScheduleKind::Sigmoid),
            "exp" | "exponential" => Ok(ScheduleKind::Exponential),
            other => Err(format!("unknown schedule kind {other:?} (linear, sigmoid, exp)")),
        }
    }
}

/// Curriculum position: the rate rises from 0 at `epoch = 0` to `p_max` at
/// `epoch = total`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleState {
    pub kind: ScheduleKind,
    pub epoch: usize,
    pub total: usize,
    pub p_max: f64,
}

impl ScheduleState {
    pub fn new(kind: ScheduleKind, total: usize, p_max: f64) -> Self {
        ScheduleState {
            kind,
            epoch: 0,
            total: total.max(1),
            p_max,
        }
    }

    pub fn value(&self) -> f64 {
        schedule_value(self.kind, self.epoch, self.total, self.p_max)
    }

    pub fn advance(&mut self) {
        self.epoch += 1;
    }
}

/// Rate of a curriculum schedule at epoch `i` of `n`; `i > n` clamps to `n`.
///
/// - linear: `p_max · i/n`
/// - exponential: `p_max · (2^(i/n) - 1)`
/// - sigmoid: logistic in `i/n` centred at ½, rescaled to hit 0 and `p_max`
///   exactly at the ends.
pub fn schedule_value(kind: ScheduleKind, i: usize, n: usize, p_max: f64) -> f64 {
    let n = n.max(1);
    let x = i.min(n) as f64 / n as f64;
    let frac = match kind {
        ScheduleKind::Linear => x,
        ScheduleKind::Exponential => x.exp2() - 1.0,
        ScheduleKind::Sigmoid => {
            let k = SIGMOID_STEEPNESS;
            let lo = sigmoid(-k / 2.0);
            let hi = sigmoid(k / 2.0);
            (sigmoid(k * (x - 0.5)) - lo) / (hi - lo)
        }
    };
    p_max * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [ScheduleKind; 3] = [
        ScheduleKind::Linear,
        ScheduleKind::Sigmoid,
        ScheduleKind::Exponential,
    ];

    #[test]
    fn endpoints() {
        for kind in KINDS {
            for n in [1, 4, 10, 40] {
                assert_eq!(schedule_value(kind, 0, n, 0.3), 0.0);
                assert!((schedule_value(kind, n, n, 0.3) - 0.3).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn reference_values() {
        let e = schedule_value(ScheduleKind::Exponential, 20, 40, 0.3);
        assert!((e - 0.3 * (2f64.sqrt() - 1.0)).abs() < 1e-12);
        assert!((e - 0.12426).abs() < 1e-5);
        let l = schedule_value(ScheduleKind::Linear, 10, 40, 0.3);
        assert!((l - 0.075).abs() < 1e-15);
    }

    #[test]
    fn monotone_and_clamped() {
        for kind in KINDS {
            let vals: Vec<f64> = (0..=50).map(|i| schedule_value(kind, i, 40, 0.3)).collect();
            assert!(vals.windows(2).all(|w| w[1] >= w[0]));
            assert_eq!(vals[45], vals[40]);
        }
    }

    #[test]
    fn state_advances() {
        let mut s = ScheduleState::new(ScheduleKind::Linear, 4, 0.3);
        let mut seen = vec![s.value()];
        for _ in 0..4 {
            s.advance();
            seen.push(s.value());
        }
        let expect = [0.0, 0.075, 0.15, 0.225, 0.3];
        for (a, b) in seen.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
