//! Weighted-score accumulators behind the posterior estimates.

use crate::network::{Hypothesis, LogProb};

/// Headroom added to the running scale on rescale, so that slowly rising
/// scores do not trigger an O(n) rescale on every trial.
const HEADROOM: f64 = 30.0;

/// Per-disease weighted scores for the present and absent states.
///
/// Scores span hundreds of orders of magnitude, so slots are stored relative
/// to `exp(log_scale)` and rescaled when a larger score arrives.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTable {
    present: Vec<f64>,
    absent: Vec<f64>,
    total: f64,
    log_scale: Option<f64>,
    trials: u64,
    scored: u64,
}

impl EstimateTable {
    pub fn new(n: usize) -> EstimateTable {
        EstimateTable {
            present: vec![0.0; n],
            absent: vec![0.0; n],
            total: 0.0,
            log_scale: None,
            trials: 0,
            scored: 0,
        }
    }

    pub fn diseases(&self) -> usize {
        self.present.len()
    }

    /// All trials seen, including zero-score ones.
    pub fn trials(&self) -> u64 {
        self.trials
    }

    /// Trials with a nonzero score.
    pub fn scored_trials(&self) -> u64 {
        self.scored
    }

    /// Scaled slot values; multiply by `exp(log_scale)` for actual mass.
    pub fn present_slots(&self) -> &[f64] {
        &self.present
    }

    pub fn absent_slots(&self) -> &[f64] {
        &self.absent
    }

    pub fn scaled_total(&self) -> f64 {
        self.total
    }

    pub fn log_scale(&self) -> Option<f64> {
        self.log_scale
    }

    /// ln Σ_t Z_t
    pub fn log_total(&self) -> LogProb {
        match self.log_scale {
            Some(s) if self.total > 0.0 => LogProb::Ln(s + self.total.ln()),
            _ => LogProb::Zero,
        }
    }

    /// Add one trial. `mb` holds P(d_i = present | w) when Markov blanket
    /// scoring is on; otherwise the indicator of the sampled state is used.
    pub fn accumulate(&mut self, h: &Hypothesis, log_score: LogProb, mb: Option<&[f64]>) {
        self.trials += 1;
        let LogProb::Ln(lz) = log_score else { return };
        let scale = match self.log_scale {
            Some(s) if lz <= s => s,
            Some(s) => {
                let ns = lz + HEADROOM;
                let r = (s - ns).exp();
                self.present.iter_mut().for_each(|v| *v *= r);
                self.absent.iter_mut().for_each(|v| *v *= r);
                self.total *= r;
                self.log_scale = Some(ns);
                ns
            }
            None => {
                let ns = lz + HEADROOM;
                self.log_scale = Some(ns);
                ns
            }
        };
        let z = (lz - scale).exp();
        self.scored += 1;
        self.total += z;
        match mb {
            Some(mb) => {
                for ((p, a), &w) in self.present.iter_mut().zip(self.absent.iter_mut()).zip(mb) {
                    let zp = z * w;
                    *p += zp;
                    *a += z - zp;
                }
            }
            None => {
                for (i, (p, a)) in self.present.iter_mut().zip(self.absent.iter_mut()).enumerate() {
                    if h.get(i) {
                        *p += z;
                    } else {
                        *a += z;
                    }
                }
            }
        }
    }

    /// P̂(d_i = present | N_F), or `None` before any nonzero score.
    pub fn estimates(&self) -> Option<Vec<f64>> {
        if self.total > 0.0 {
            Some(
                self.present
                    .iter()
                    .map(|&p| (p / self.total).clamp(0.0, 1.0))
                    .collect(),
            )
        } else {
            None
        }
    }

    /// max_i |present_i + absent_i − total| / total
    pub fn slot_residual(&self) -> f64 {
        if self.total <= 0.0 {
            return 0.0;
        }
        self.present
            .iter()
            .zip(&self.absent)
            .map(|(p, a)| ((p + a) - self.total).abs() / self.total)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_trial_indicator() {
        let mut t = EstimateTable::new(3);
        let h = Hypothesis::from_bools(&[true, false, true]);
        t.accumulate(&h, LogProb::Ln(-300.0), None);
        assert_eq!(t.estimates().unwrap(), vec![1.0, 0.0, 1.0]);
        assert_relative_eq!(t.log_total().ln().unwrap(), -300.0, epsilon = 1e-9);
    }

    #[test]
    fn single_trial_blanket() {
        let mut t = EstimateTable::new(2);
        let h = Hypothesis::from_bools(&[true, false]);
        t.accumulate(&h, LogProb::Ln(-2.0), Some(&[0.3, 0.9]));
        let e = t.estimates().unwrap();
        assert_relative_eq!(e[0], 0.3, epsilon = 1e-12);
        assert_relative_eq!(e[1], 0.9, epsilon = 1e-12);
        assert!(t.slot_residual() < 1e-12);
    }

    #[test]
    fn zero_score_only_counts() {
        let mut t = EstimateTable::new(2);
        let h = Hypothesis::from_bools(&[true, false]);
        t.accumulate(&h, LogProb::Zero, None);
        assert_eq!(t.trials(), 1);
        assert_eq!(t.scored_trials(), 0);
        assert!(t.estimates().is_none());
        assert_eq!(t, {
            let mut e = EstimateTable::new(2);
            e.trials = 1;
            e
        });
    }

    #[test]
    fn rescaling_preserves_ratios() {
        let mut t = EstimateTable::new(1);
        let on = Hypothesis::from_bools(&[true]);
        let off = Hypothesis::from_bools(&[false]);
        // weights e^-500 (present) and e^-100 (absent), arriving small first
        t.accumulate(&on, LogProb::Ln(-500.0), None);
        t.accumulate(&off, LogProb::Ln(-100.0), None);
        t.accumulate(&on, LogProb::Ln(-100.0 + 2f64.ln()), None);
        let e = t.estimates().unwrap()[0];
        // (e^-500 + 2e^-100) / (e^-500 + 3e^-100) ≈ 2/3
        assert_relative_eq!(e, 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(t.log_total().ln().unwrap(), -100.0 + 3f64.ln(), epsilon = 1e-12);
    }
}
