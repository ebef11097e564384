//! Two-level noisy-OR belief network: diseases on top, findings below.
//!
//! All likelihood arithmetic here is done in log space. A factor that is
//! exactly zero is carried as [`LogProb::Zero`] instead of `-inf`, so that
//! joints as small as 1e-130 and impossible configurations stay distinct.

use std::fmt;
use std::ops::{Div, Mul};

use crate::error::{Error, Result};

/// Link probabilities for the five QMR frequency codes.
pub const FREQUENCY_TABLE: [f64; 5] = [0.025, 0.20, 0.50, 0.80, 0.985];

/// Map a QMR frequency code (1..=5) to `P(F_j | only D_i)`.
pub fn freq_to_prob(code: i64) -> Result<f64> {
    if (1..=5).contains(&code) {
        Ok(FREQUENCY_TABLE[(code - 1) as usize])
    } else {
        Err(Error::FrequencyCode(code))
    }
}

/// Inverse of [`freq_to_prob`] for values that are exactly a table entry.
pub fn prob_to_freq(q: f64) -> Option<u8> {
    FREQUENCY_TABLE
        .iter()
        .position(|&v| v == q)
        .map(|i| i as u8 + 1)
}

/// A natural-log probability with an explicit zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogProb {
    Zero,
    Ln(f64),
}

impl LogProb {
    pub const ONE: LogProb = LogProb::Ln(0.0);

    pub fn from_prob(p: f64) -> LogProb {
        if p > 0.0 {
            LogProb::Ln(p.ln())
        } else {
            LogProb::Zero
        }
    }

    pub fn is_zero(self) -> bool {
        matches!(self, LogProb::Zero)
    }

    pub fn ln(self) -> Option<f64> {
        match self {
            LogProb::Zero => None,
            LogProb::Ln(v) => Some(v),
        }
    }

    pub fn log10(self) -> Option<f64> {
        self.ln().map(|v| v / std::f64::consts::LN_10)
    }

    pub fn prob(self) -> f64 {
        match self {
            LogProb::Zero => 0.0,
            LogProb::Ln(v) => v.exp(),
        }
    }
}

impl Mul for LogProb {
    type Output = LogProb;
    fn mul(self, rhs: LogProb) -> LogProb {
        match (self, rhs) {
            (LogProb::Ln(a), LogProb::Ln(b)) => LogProb::Ln(a + b),
            _ => LogProb::Zero,
        }
    }
}

/// Division by a nonzero denominator. Dividing by zero yields `Zero`;
/// callers never divide by a zero proposal probability.
impl Div for LogProb {
    type Output = LogProb;
    fn div(self, rhs: LogProb) -> LogProb {
        match (self, rhs) {
            (LogProb::Ln(a), LogProb::Ln(b)) => LogProb::Ln(a - b),
            _ => LogProb::Zero,
        }
    }
}

impl fmt::Display for LogProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogProb::Zero => write!(f, "zero"),
            LogProb::Ln(v) => write!(f, "ln {v}"),
        }
    }
}

/// One disease→finding arc, seen from either end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    /// Disease index when stored on a finding, finding index when stored on a disease.
    pub node: usize,
    pub q: f64,
}

/// Immutable two-level noisy-OR network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    name: String,
    priors: Vec<f64>,
    /// parents[j]: π(F_j), sorted by disease index
    parents: Vec<Vec<Link>>,
    /// children[i]: S(D_i), sorted by finding index
    children: Vec<Vec<Link>>,
}

impl Network {
    /// Build a network from priors, a finding count and `(disease, finding, q)` arcs.
    pub fn new(
        name: impl Into<String>,
        priors: Vec<f64>,
        findings: usize,
        arcs: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Network> {
        let n = priors.len();
        for (i, &p) in priors.iter().enumerate() {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidNetwork(format!(
                    "prior of disease {i} is {p}, must be in (0, 1)"
                )));
            }
        }
        let mut parents: Vec<Vec<Link>> = vec![Vec::new(); findings];
        let mut children: Vec<Vec<Link>> = vec![Vec::new(); n];
        for (i, j, q) in arcs {
            if i >= n {
                return Err(Error::InvalidNetwork(format!("arc from unknown disease {i}")));
            }
            if j >= findings {
                return Err(Error::InvalidNetwork(format!("arc to unknown finding {j}")));
            }
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::InvalidNetwork(format!(
                    "link probability {q} on arc ({i}, {j}) must be in (0, 1]"
                )));
            }
            parents[j].push(Link { node: i, q });
            children[i].push(Link { node: j, q });
        }
        for (j, list) in parents.iter_mut().enumerate() {
            list.sort_by_key(|l| l.node);
            if let Some(w) = list.windows(2).find(|w| w[0].node == w[1].node) {
                return Err(Error::InvalidNetwork(format!(
                    "duplicate arc ({}, {j})",
                    w[0].node
                )));
            }
        }
        for list in children.iter_mut() {
            list.sort_by_key(|l| l.node);
        }
        Ok(Network {
            name: name.into(),
            priors,
            parents,
            children,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn diseases(&self) -> usize {
        self.priors.len()
    }

    pub fn findings(&self) -> usize {
        self.parents.len()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn prior(&self, i: usize) -> f64 {
        self.priors[i]
    }

    /// π(F_j)
    pub fn parents(&self, j: usize) -> &[Link] {
        &self.parents[j]
    }

    /// S(D_i)
    pub fn children(&self, i: usize) -> &[Link] {
        &self.children[i]
    }

    pub fn arc_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Link probability of arc (i, j), if present.
    pub fn link(&self, i: usize, j: usize) -> Option<f64> {
        self.parents[j]
            .binary_search_by_key(&i, |l| l.node)
            .ok()
            .map(|k| self.parents[j][k].q)
    }

    /// All arcs as `(disease, finding, q)` in finding-major order.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(j, ps)| ps.iter().map(move |l| (l.node, j, l.q)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FindingState {
    Present,
    Absent,
}

/// Observed findings for one case: N_F⁺ and N_F⁻, each sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Evidence {
    present: Vec<usize>,
    absent: Vec<usize>,
}

impl Evidence {
    pub fn new(
        findings: usize,
        present: impl IntoIterator<Item = usize>,
        absent: impl IntoIterator<Item = usize>,
    ) -> Result<Evidence> {
        let mut present: Vec<usize> = present.into_iter().collect();
        let mut absent: Vec<usize> = absent.into_iter().collect();
        present.sort_unstable();
        present.dedup();
        absent.sort_unstable();
        absent.dedup();
        if let Some(&j) = present.iter().chain(&absent).find(|&&j| j >= findings) {
            return Err(Error::InvalidEvidence(format!(
                "finding {j} out of range (m = {findings})"
            )));
        }
        if let Some(&j) = present.iter().find(|j| absent.binary_search(j).is_ok()) {
            return Err(Error::InvalidEvidence(format!(
                "finding {j} observed both present and absent"
            )));
        }
        Ok(Evidence { present, absent })
    }

    pub fn empty() -> Evidence {
        Evidence::default()
    }

    pub fn present(&self) -> &[usize] {
        &self.present
    }

    pub fn absent(&self) -> &[usize] {
        &self.absent
    }

    pub fn len(&self) -> usize {
        self.present.len() + self.absent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All observations as `(finding, state)`, present findings first.
    pub fn observations(&self) -> impl Iterator<Item = (usize, FindingState)> + '_ {
        self.present
            .iter()
            .map(|&j| (j, FindingState::Present))
            .chain(self.absent.iter().map(|&j| (j, FindingState::Absent)))
    }

    pub fn state_of(&self, j: usize) -> Option<FindingState> {
        if self.present.binary_search(&j).is_ok() {
            Some(FindingState::Present)
        } else if self.absent.binary_search(&j).is_ok() {
            Some(FindingState::Absent)
        } else {
            None
        }
    }
}

/// A full present/absent assignment over the diseases, stored as a bitset.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Hypothesis {
    words: Vec<u64>,
    len: usize,
}

impl Hypothesis {
    pub fn all_absent(len: usize) -> Hypothesis {
        Hypothesis {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_present(len: usize, present: impl IntoIterator<Item = usize>) -> Hypothesis {
        let mut h = Hypothesis::all_absent(len);
        for i in present {
            h.set(i, true);
        }
        h
    }

    pub fn from_bools(states: &[bool]) -> Hypothesis {
        let mut h = Hypothesis::all_absent(states.len());
        for (i, &s) in states.iter().enumerate() {
            h.set(i, s);
        }
        h
    }

    /// The hypothesis whose present set is the set bits of `mask` (n ≤ 64).
    pub fn from_mask(len: usize, mask: u64) -> Hypothesis {
        assert!(len <= 64);
        let mut h = Hypothesis::all_absent(len);
        if len > 0 {
            h.words[0] = if len == 64 { mask } else { mask & ((1u64 << len) - 1) };
        }
        h
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, present: bool) {
        assert!(i < self.len, "disease {i} out of range for hypothesis of length {}", self.len);
        let bit = 1u64 << (i & 63);
        if present {
            self.words[i >> 6] |= bit;
        } else {
            self.words[i >> 6] &= !bit;
        }
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
    }

    /// |H⁺|
    pub fn cardinality(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of present diseases, ascending.
    pub fn present(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(k * 64 + b)
                }
            })
        })
    }
}

impl fmt::Debug for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H+{:?}", self.present().collect::<Vec<_>>())
    }
}

/// ln P(H) under marginally independent priors.
pub fn log_prior(net: &Network, h: &Hypothesis) -> f64 {
    assert_eq!(h.len(), net.diseases(), "hypothesis length must equal n");
    net.priors
        .iter()
        .enumerate()
        .map(|(i, &p)| if h.get(i) { p.ln() } else { (-p).ln_1p() })
        .sum()
}

/// P(f_j = state | H) under the leak-free noisy-OR.
pub fn finding_likelihood(net: &Network, j: usize, state: FindingState, h: &Hypothesis) -> f64 {
    let fail: f64 = net.parents[j]
        .iter()
        .filter(|l| h.get(l.node))
        .map(|l| 1.0 - l.q)
        .product();
    match state {
        FindingState::Present => 1.0 - fail,
        FindingState::Absent => fail,
    }
}

/// ln P(N_F | H), with conditional independence of findings given H.
pub fn log_evidence_likelihood(net: &Network, ev: &Evidence, h: &Hypothesis) -> LogProb {
    let mut acc = 0.0;
    for (j, state) in ev.observations() {
        let p = finding_likelihood(net, j, state, h);
        if p <= 0.0 {
            return LogProb::Zero;
        }
        acc += p.ln();
    }
    LogProb::Ln(acc)
}

/// ln P(N_F, H).
pub fn log_joint(net: &Network, ev: &Evidence, h: &Hypothesis) -> LogProb {
    LogProb::Ln(log_prior(net, h)) * log_evidence_likelihood(net, ev, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn two_disease_net() -> Network {
        // F0: D0 q=0.2 ; F1: D0 q=0.5 ; F2: D0 0.5, D1 0.5
        Network::new(
            "t",
            vec![0.1, 0.2],
            3,
            [(0, 0, 0.2), (0, 1, 0.5), (0, 2, 0.5), (1, 2, 0.5)],
        )
        .unwrap()
    }

    #[test]
    fn frequency_table_values() {
        assert_eq!(freq_to_prob(1).unwrap(), 0.025);
        assert_eq!(freq_to_prob(3).unwrap(), 0.50);
        assert_eq!(freq_to_prob(5).unwrap(), 0.985);
        assert_eq!(freq_to_prob(0), Err(Error::FrequencyCode(0)));
        assert_eq!(freq_to_prob(6), Err(Error::FrequencyCode(6)));
        assert_eq!(prob_to_freq(0.8), Some(4));
        assert_eq!(prob_to_freq(0.81), None);
    }

    #[test]
    fn log_prior_examples() {
        let net = two_disease_net();
        let h = Hypothesis::from_bools(&[true, false]);
        assert_relative_eq!(log_prior(&net, &h), 0.08f64.ln(), epsilon = 1e-15);

        let empty = Network::new("e", vec![], 0, []).unwrap();
        assert_eq!(log_prior(&empty, &Hypothesis::all_absent(0)), 0.0);

        let half = Network::new("h", vec![0.5, 0.5], 0, []).unwrap();
        assert_relative_eq!(
            log_prior(&half, &Hypothesis::all_absent(2)),
            0.25f64.ln(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn noisy_or_examples() {
        let net = two_disease_net();
        let only0 = Hypothesis::from_bools(&[true, false]);
        assert_relative_eq!(finding_likelihood(&net, 0, FindingState::Present, &only0), 0.2, epsilon = 1e-15);
        let both = Hypothesis::from_bools(&[true, true]);
        assert_eq!(finding_likelihood(&net, 2, FindingState::Present, &both), 0.75);
        let none = Hypothesis::all_absent(2);
        assert_eq!(finding_likelihood(&net, 2, FindingState::Present, &none), 0.0);
        assert_eq!(finding_likelihood(&net, 2, FindingState::Absent, &none), 1.0);
    }

    #[test]
    fn evidence_likelihood_examples() {
        let net = two_disease_net();
        let h = Hypothesis::from_bools(&[true, false]);
        let ev = Evidence::new(3, [0], [1]).unwrap();
        let ll = log_evidence_likelihood(&net, &ev, &h).ln().unwrap();
        assert_relative_eq!(ll, 0.1f64.ln(), epsilon = 1e-14);

        assert_eq!(log_evidence_likelihood(&net, &Evidence::empty(), &h), LogProb::ONE);

        let none = Hypothesis::all_absent(2);
        assert!(log_evidence_likelihood(&net, &ev, &none).is_zero());
    }

    #[test]
    fn log_joint_composes() {
        let net = two_disease_net();
        let h = Hypothesis::from_bools(&[true, false]);
        let ev = Evidence::new(3, [0], [1]).unwrap();
        let j = log_joint(&net, &ev, &h).ln().unwrap();
        assert_relative_eq!(j, 0.08f64.ln() + 0.1f64.ln(), epsilon = 1e-14);

        let empty = Network::new("e", vec![], 0, []).unwrap();
        assert_eq!(
            log_joint(&empty, &Evidence::empty(), &Hypothesis::all_absent(0)),
            LogProb::ONE
        );
        assert!(log_joint(&net, &ev, &Hypothesis::all_absent(2)).is_zero());
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(Network::new("x", vec![0.0], 1, []).is_err());
        assert!(Network::new("x", vec![1.0], 1, []).is_err());
        assert!(Network::new("x", vec![0.5], 1, [(0, 0, 0.0)]).is_err());
        assert!(Network::new("x", vec![0.5], 1, [(0, 0, 1.0)]).is_ok());
        assert!(Network::new("x", vec![0.5], 1, [(0, 0, 0.5), (0, 0, 0.2)]).is_err());
        assert!(Network::new("x", vec![0.5], 1, [(1, 0, 0.5)]).is_err());
        assert!(Evidence::new(3, [0, 1], [1]).is_err());
        assert!(Evidence::new(3, [3], []).is_err());
    }

    #[test]
    fn forward_and_reverse_index_agree() {
        let net = two_disease_net();
        let mut fwd: Vec<_> = net.arcs().collect();
        let mut rev: Vec<_> = (0..net.diseases())
            .flat_map(|i| net.children(i).iter().map(move |l| (i, l.node, l.q)))
            .collect();
        fwd.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(fwd, rev);
        assert_eq!(net.link(1, 2), Some(0.5));
        assert_eq!(net.link(1, 0), None);
    }

    #[test]
    fn hypothesis_bits() {
        let mut h = Hypothesis::all_absent(130);
        h.set(0, true);
        h.set(64, true);
        h.set(129, true);
        assert_eq!(h.cardinality(), 3);
        assert_eq!(h.present().collect::<Vec<_>>(), vec![0, 64, 129]);
        h.set(64, false);
        assert!(!h.get(64));
        assert_eq!(Hypothesis::from_mask(3, 0b101), Hypothesis::from_bools(&[true, false, true]));
    }

    fn arb_net() -> impl Strategy<Value = Network> {
        (1usize..=8, 1usize..=6).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(0.01f64..0.99, n),
                proptest::collection::vec(proptest::collection::vec(0.01f64..=1.0, n), m),
                proptest::collection::vec(proptest::collection::vec(any::<bool>(), n), m),
            )
                .prop_map(move |(priors, qs, mask)| {
                    let arcs: Vec<_> = (0..m)
                        .flat_map(|j| (0..n).map(move |i| (i, j)))
                        .filter(|&(i, j)| mask[j][i])
                        .map(|(i, j)| (i, j, qs[j][i]))
                        .collect();
                    Network::new("p", priors, m, arcs).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn present_and_absent_sum_to_one(net in arb_net(), mask in any::<u64>()) {
            let h = Hypothesis::from_mask(net.diseases(), mask);
            for j in 0..net.findings() {
                let p = finding_likelihood(&net, j, FindingState::Present, &h);
                let a = finding_likelihood(&net, j, FindingState::Absent, &h);
                prop_assert_eq!(p + a, 1.0);
            }
        }

        #[test]
        fn prior_sums_to_one(net in arb_net()) {
            let n = net.diseases();
            let total: f64 = (0..1u64 << n)
                .map(|mask| log_prior(&net, &Hypothesis::from_mask(n, mask)).exp())
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
        }

        #[test]
        fn joint_shrinks_with_more_evidence(net in arb_net(), mask in any::<u64>(), obs in any::<u64>()) {
            let n = net.diseases();
            let m = net.findings();
            let h = Hypothesis::from_mask(n, mask);
            let mut present = Vec::new();
            let mut absent = Vec::new();
            let mut prev = log_joint(&net, &Evidence::empty(), &h);
            for j in 0..m {
                if obs >> j & 1 == 1 { present.push(j) } else { absent.push(j) }
                let ev = Evidence::new(m, present.clone(), absent.clone()).unwrap();
                let cur = log_joint(&net, &ev, &h);
                match (prev, cur) {
                    (LogProb::Ln(a), LogProb::Ln(b)) => prop_assert!(b <= a + 1e-12),
                    (LogProb::Zero, c) => prop_assert!(c.is_zero()),
                    _ => {}
                }
                prev = cur;
            }
        }

        #[test]
        fn noisy_or_is_monotone(net in arb_net(), mask in any::<u64>(), flip in 0usize..8) {
            let n = net.diseases();
            let flip = flip % n;
            let mut h = Hypothesis::from_mask(n, mask);
            h.set(flip, false);
            let mut h2 = h.clone();
            h2.set(flip, true);
            for j in 0..net.findings() {
                prop_assert!(
                    finding_likelihood(&net, j, FindingState::Present, &h2)
                        >= finding_likelihood(&net, j, FindingState::Present, &h)
                );
            }
        }
    }
}
