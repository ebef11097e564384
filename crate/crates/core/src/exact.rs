//! Brute-force exact posteriors by enumerating all 2ⁿ disease hypotheses.
//! Only usable on desk-scale networks; the cap guards against accidental
//! runs on anything larger.

use crate::error::{Error, Result};
use crate::network::{log_joint, Evidence, Hypothesis, LogProb, Network};

pub const DEFAULT_CAP: usize = 20;

/// Result of a full enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    /// ln P(N_F)
    pub log_evidence: f64,
    /// P(D_i | N_F) for each disease
    pub posteriors: Vec<f64>,
}

impl ExactResult {
    pub fn evidence_prob(&self) -> f64 {
        self.log_evidence.exp()
    }
}

/// Log-sum-exp accumulator that rescales as larger terms arrive.
#[derive(Debug, Clone, Copy)]
struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    fn new() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    fn add(&mut self, x: f64) {
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    fn value(&self) -> LogProb {
        if self.sum > 0.0 {
            LogProb::Ln(self.max + self.sum.ln())
        } else {
            LogProb::Zero
        }
    }
}

/// Enumerate every hypothesis and return P(N_F) and all posterior marginals.
///
/// Per-disease numerators are accumulated in the same pass as the
/// normalizer. `cap` bounds n; use [`DEFAULT_CAP`] unless you mean it.
pub fn enumerate(net: &Network, ev: &Evidence, cap: usize) -> Result<ExactResult> {
    let n = net.diseases();
    if n > cap || n >= 64 {
        return Err(Error::TooManyDiseases { n, cap: cap.min(63) });
    }
    let mut total = LogSum::new();
    let mut numer = vec![LogSum::new(); n];
    for mask in 0..1u64 << n {
        let h = Hypothesis::from_mask(n, mask);
        if let LogProb::Ln(lj) = log_joint(net, ev, &h) {
            total.add(lj);
            for (i, acc) in numer.iter_mut().enumerate() {
                if mask >> i & 1 == 1 {
                    acc.add(lj);
                }
            }
        }
    }
    let log_evidence = total.value().ln().ok_or(Error::ImpossibleEvidence)?;
    let posteriors = numer
        .iter()
        .map(|acc| match acc.value() {
            LogProb::Zero => 0.0,
            LogProb::Ln(v) => (v - log_evidence).exp().min(1.0),
        })
        .collect();
    Ok(ExactResult {
        log_evidence,
        posteriors,
    })
}

/// P(D_i | N_F) for every disease.
pub fn exact_posteriors(net: &Network, ev: &Evidence) -> Result<Vec<f64>> {
    enumerate(net, ev, DEFAULT_CAP).map(|r| r.posteriors)
}

/// P(N_F).
pub fn exact_evidence_prob(net: &Network, ev: &Evidence) -> Result<f64> {
    enumerate(net, ev, DEFAULT_CAP).map(|r| r.evidence_prob())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example_net() -> (Network, Evidence) {
        let net = Network::new("ex", vec![0.5, 0.5], 1, [(0, 0, 0.4), (1, 0, 0.5)]).unwrap();
        let ev = Evidence::new(1, [0], []).unwrap();
        (net, ev)
    }

    /// Independent hand enumeration of the four hypotheses in linear space.
    #[test]
    fn two_disease_example_matches_hand_enumeration() {
        let (net, ev) = example_net();
        // P(H) = 0.25 for each; P(F|H): {}:0, {1}:0.4, {2}:0.5, {1,2}:1-0.6*0.5=0.7
        let joints = [0.0, 0.25 * 0.4, 0.25 * 0.5, 0.25 * 0.7];
        let z: f64 = joints.iter().sum();
        assert_relative_eq!(z, 0.4, epsilon = 1e-15);
        let p1 = (joints[1] + joints[3]) / z;
        let p2 = (joints[2] + joints[3]) / z;
        assert_relative_eq!(p1, 0.6875, epsilon = 1e-12);
        assert_relative_eq!(p2, 0.75, epsilon = 1e-12);

        let r = enumerate(&net, &ev, DEFAULT_CAP).unwrap();
        assert_relative_eq!(r.evidence_prob(), z, epsilon = 1e-12);
        assert_relative_eq!(r.posteriors[0], p1, epsilon = 1e-12);
        assert_relative_eq!(r.posteriors[1], p2, epsilon = 1e-12);
    }

    #[test]
    fn empty_evidence_gives_priors() {
        let net = Network::new("p", vec![0.1, 0.3, 0.7], 2, [(0, 0, 0.5), (2, 1, 0.9)]).unwrap();
        let r = enumerate(&net, &Evidence::empty(), DEFAULT_CAP).unwrap();
        assert_relative_eq!(r.evidence_prob(), 1.0, epsilon = 1e-12);
        for (p, q) in r.posteriors.iter().zip(net.priors()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn no_diseases() {
        let net = Network::new("z", vec![], 0, []).unwrap();
        assert_eq!(exact_evidence_prob(&net, &Evidence::empty()).unwrap(), 1.0);
    }

    #[test]
    fn impossible_evidence() {
        let net = Network::new("i", vec![0.3], 1, []).unwrap();
        let ev = Evidence::new(1, [0], []).unwrap();
        assert_eq!(exact_posteriors(&net, &ev), Err(Error::ImpossibleEvidence));
    }

    #[test]
    fn cap_is_enforced() {
        let net = Network::new("c", vec![0.1; 5], 0, []).unwrap();
        assert_eq!(
            enumerate(&net, &Evidence::empty(), 4),
            Err(Error::TooManyDiseases { n: 5, cap: 4 })
        );
    }

    #[test]
    fn order_of_accumulation_does_not_matter() {
        let net = Network::new(
            "o",
            vec![0.01, 0.2, 0.05, 0.3],
            3,
            [(0, 0, 0.9), (1, 0, 0.2), (2, 1, 0.5), (3, 1, 0.5), (1, 2, 0.8)],
        )
        .unwrap();
        let ev = Evidence::new(3, [0, 1], [2]).unwrap();
        let fwd = enumerate(&net, &ev, DEFAULT_CAP).unwrap();
        let mut rev_total = LogSum::new();
        for mask in (0..16u64).rev() {
            if let LogProb::Ln(v) = log_joint(&net, &ev, &Hypothesis::from_mask(4, mask)) {
                rev_total.add(v);
            }
        }
        assert!((rev_total.value().ln().unwrap() - fwd.log_evidence).abs() < 1e-10);
        for p in &fwd.posteriors {
            assert!((0.0..=1.0).contains(p));
        }
    }
}
