//! The importance distribution P′ and trial-level randomness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{Hypothesis, LogProb};

/// Per-disease instantiation probabilities P′ together with the frozen P′₀.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    current: Vec<f64>,
    original: Vec<f64>,
    /// Σ_i ln(1 − P′_i)
    log_all_absent: f64,
    /// ln(P′_i / (1 − P′_i))
    log_odds: Vec<f64>,
}

impl SamplingDistribution {
    pub fn new(original: Vec<f64>) -> Result<SamplingDistribution> {
        check_open_unit(&original)?;
        let mut d = SamplingDistribution {
            current: original.clone(),
            original,
            log_all_absent: 0.0,
            log_odds: Vec::new(),
        };
        d.refresh();
        Ok(d)
    }

    fn refresh(&mut self) {
        self.log_all_absent = self.current.iter().map(|&p| (-p).ln_1p()).sum();
        self.log_odds = self
            .current
            .iter()
            .map(|&p| p.ln() - (-p).ln_1p())
            .collect();
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    pub fn current(&self) -> &[f64] {
        &self.current
    }

    pub fn original(&self) -> &[f64] {
        &self.original
    }

    /// ln P′(H)
    pub fn log_prob(&self, h: &Hypothesis) -> LogProb {
        LogProb::Ln(self.log_all_absent + h.present().map(|i| self.log_odds[i]).sum::<f64>())
    }

    /// Replace the current probabilities, keeping P′₀.
    pub fn set_current(&mut self, current: Vec<f64>) -> Result<()> {
        if current.len() != self.original.len() {
            return Err(Error::InvalidDistribution(format!(
                "length {} does not match {}",
                current.len(),
                self.original.len()
            )));
        }
        check_open_unit(&current)?;
        self.current = current;
        self.refresh();
        Ok(())
    }

    /// Draw one hypothesis into `h`, each disease independently.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, h: &mut Hypothesis) {
        debug_assert_eq!(h.len(), self.current.len());
        h.clear();
        for (i, &p) in self.current.iter().enumerate() {
            if rng.random::<f64>() < p {
                h.set(i, true);
            }
        }
    }
}

fn check_open_unit(ps: &[f64]) -> Result<()> {
    match ps.iter().position(|&p| !(p > 0.0 && p < 1.0)) {
        Some(i) => Err(Error::InvalidDistribution(format!(
            "entry {i} is {}, must be strictly inside (0, 1)",
            ps[i]
        ))),
        None => Ok(()),
    }
}

/// Draw a hypothesis from `dist`.
pub fn sample_hypothesis<R: Rng + ?Sized>(dist: &SamplingDistribution, rng: &mut R) -> Hypothesis {
    let mut h = Hypothesis::all_absent(dist.len());
    dist.sample_into(rng, &mut h);
    h
}

/// Seedable generator handing out one independent ChaCha stream per trial,
/// so a trial's draws depend only on (seed, trial index).
#[derive(Debug, Clone)]
pub struct TrialStreams {
    base: ChaCha8Rng,
}

impl TrialStreams {
    pub fn new(seed: u64) -> TrialStreams {
        TrialStreams {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn stream(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(trial);
        rng.set_word_pos(0);
        rng
    }
}

/// Convenience for callers that just need a seeded generator.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
