//! Single-disease (tabular Bayes) scoring, the iterative heuristic that picks
//! the heuristic-importance set, and the initial proposal P′₀ built from it.

use crate::engine::sampling::SamplingDistribution;
use crate::error::{Error, Result};
use crate::network::{Evidence, Network};

/// Default cap on heuristic rounds; the set usually holds about this many diseases.
pub const DEFAULT_ITB_ROUNDS: usize = 25;

/// Default lower bound on P′₀ for diseases outside the importance set.
pub const DEFAULT_FLOOR: f64 = 1e-3;

/// Diseases selected by [`itb_importance_set`], in selection order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ImportanceSet {
    members: Vec<usize>,
}

impl ImportanceSet {
    pub fn new(members: impl IntoIterator<Item = usize>) -> ImportanceSet {
        let mut out: Vec<usize> = Vec::new();
        for m in members {
            if !out.contains(&m) {
                out.push(m);
            }
        }
        ImportanceSet { members: out }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.contains(&i)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// ln P(findings | only D_i), or `None` when D_i alone cannot produce them.
fn single_disease_log_likelihood(
    net: &Network,
    i: usize,
    present: &[usize],
    absent: &[usize],
) -> Option<f64> {
    let mut acc = 0.0;
    for &j in present {
        acc += net.link(i, j)?.ln();
    }
    for &j in absent {
        if let Some(q) = net.link(i, j) {
            if q >= 1.0 {
                return None;
            }
            acc += (-q).ln_1p();
        }
    }
    Some(acc)
}

/// Tabular Bayes over an explicit finding subset; `skip[i]` removes D_i from
/// the candidate set.
fn tabular_bayes_on(
    net: &Network,
    present: &[usize],
    absent: &[usize],
    skip: &[bool],
) -> Result<Vec<f64>> {
    let n = net.diseases();
    // P(only D_i) ∝ odds_i; the shared Π(1 − p_k) cancels in the normalization.
    let logs: Vec<Option<f64>> = (0..n)
        .map(|i| {
            if skip.get(i).copied().unwrap_or(false) {
                return None;
            }
            let p = net.prior(i);
            single_disease_log_likelihood(net, i, present, absent)
                .map(|ll| ll + p.ln() - (-p).ln_1p())
        })
        .collect();
    let max = logs
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::NoSingleDiseaseExplanation);
    }
    let weights: Vec<f64> = logs
        .iter()
        .map(|l| l.map_or(0.0, |v| (v - max).exp()))
        .collect();
    let z: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / z).collect())
}

/// P(only D_i | N_F, μ) for every disease, under mutual exclusivity.
pub fn tabular_bayes(net: &Network, ev: &Evidence) -> Result<Vec<f64>> {
    tabular_bayes_on(net, ev.present(), ev.absent(), &[])
}

/// Highest-probability index, ties to the lowest index.
fn argmax(ps: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &p) in ps.iter().enumerate() {
        if p > 0.0 && best.is_none_or(|b| p > ps[b]) {
            best = Some(i);
        }
    }
    best
}

/// Iterative tabular Bayes: repeatedly score single-disease explanations of
/// the still-unexplained positive findings and add the winner.
///
/// Each round works on a subset of the unexplained positive findings: starting
/// from the lowest-indexed one, findings are added in index order as long as
/// some remaining candidate is a parent of every finding in the subset. All
/// negative findings are always included. The top-ranked disease joins the
/// set and every positive finding among its children is marked explained.
/// Stops when everything is explained, nothing scores above zero, or after
/// `max_rounds` rounds.
pub fn itb_importance_set(net: &Network, ev: &Evidence, max_rounds: usize) -> ImportanceSet {
    let n = net.diseases();
    let mut chosen = vec![false; n];
    let mut members = Vec::new();
    let mut unexplained: Vec<usize> = ev.present().to_vec();

    while !unexplained.is_empty() && members.len() < max_rounds {
        let subset = coverable_subset(net, &unexplained, &chosen);
        if subset.is_empty() {
            break;
        }
        let Ok(ranked) = tabular_bayes_on(net, &subset, ev.absent(), &chosen) else {
            break;
        };
        let Some(top) = argmax(&ranked) else { break };
        chosen[top] = true;
        members.push(top);
        unexplained.retain(|&j| net.link(top, j).is_none());
    }
    ImportanceSet { members }
}

/// Greedy prefix of `findings` that at least one unchosen disease covers entirely.
fn coverable_subset(net: &Network, findings: &[usize], chosen: &[bool]) -> Vec<usize> {
    let mut candidates: Vec<usize> = Vec::new();
    let mut subset = Vec::new();
    for &j in findings {
        let parents = net.parents(j).iter().map(|l| l.node).filter(|&i| !chosen[i]);
        if subset.is_empty() {
            candidates = parents.collect();
            if !candidates.is_empty() {
                subset.push(j);
            }
        } else {
            let narrowed: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&i| net.link(i, j).is_some())
                .collect();
            if !narrowed.is_empty() {
                candidates = narrowed;
                subset.push(j);
            }
        }
    }
    subset
}

/// P′₀: 1/N for each importance-set member, max(floor, prior) elsewhere,
/// everything clamped into [floor, 1 − floor].
///
/// A lone member gets 1/2 rather than 1: sampling it with near certainty
/// leaves the hypotheses without it to a handful of enormous weights.
pub fn initial_sampling_distribution(
    net: &Network,
    his: &ImportanceSet,
    floor: f64,
) -> Result<SamplingDistribution> {
    if !(floor > 0.0 && floor < 0.5) {
        return Err(Error::InvalidConfig(format!("floor {floor} must be in (0, 0.5)")));
    }
    if let Some(&i) = his.members().iter().find(|&&i| i >= net.diseases()) {
        return Err(Error::InvalidConfig(format!("importance set names unknown disease {i}")));
    }
    let member_p = 1.0 / his.len().max(2) as f64;
    let probs = (0..net.diseases())
        .map(|i| {
            let p = if his.contains(i) {
                member_p
            } else {
                net.prior(i).max(floor)
            };
            p.clamp(floor, 1.0 - floor)
        })
        .collect();
    SamplingDistribution::new(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example() -> (Network, Evidence) {
        let net = Network::new("ex", vec![0.5, 0.5], 1, [(0, 0, 0.4), (1, 0, 0.5)]).unwrap();
        (net, Evidence::new(1, [0], []).unwrap())
    }

    #[test]
    fn two_disease_example() {
        let (net, ev) = example();
        // Two-term enumeration: P(only D1) = P(only D2) = 0.25.
        let a = 0.25 * 0.4;
        let b = 0.25 * 0.5;
        let d = tabular_bayes(&net, &ev).unwrap();
        assert_relative_eq!(d[0], a / (a + b), epsilon = 1e-12);
        assert_relative_eq!(d[1], b / (a + b), epsilon = 1e-12);
        assert_relative_eq!(d[0], 0.4444, epsilon = 1e-4);
    }

    #[test]
    fn empty_evidence_follows_single_disease_priors() {
        let priors = vec![0.1, 0.2, 0.05];
        let net = Network::new("p", priors.clone(), 0, []).unwrap();
        let d = tabular_bayes(&net, &Evidence::empty()).unwrap();
        let only: Vec<f64> = (0..3)
            .map(|i| {
                (0..3)
                    .map(|k| if k == i { priors[k] } else { 1.0 - priors[k] })
                    .product()
            })
            .collect();
        let z: f64 = only.iter().sum();
        for i in 0..3 {
            assert_relative_eq!(d[i], only[i] / z, epsilon = 1e-12);
        }
    }

    #[test]
    fn symmetric_network_is_uniform() {
        let net = Network::new(
            "s",
            vec![0.1; 4],
            2,
            (0..4).flat_map(|i| [(i, 0, 0.5), (i, 1, 0.2)]),
        )
        .unwrap();
        let ev = Evidence::new(2, [0], [1]).unwrap();
        for p in tabular_bayes(&net, &ev).unwrap() {
            assert_relative_eq!(p, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn no_single_disease_explanation() {
        let net = Network::new("x", vec![0.1, 0.1], 2, [(0, 0, 0.5), (1, 1, 0.5)]).unwrap();
        let ev = Evidence::new(2, [0, 1], []).unwrap();
        assert_eq!(tabular_bayes(&net, &ev), Err(Error::NoSingleDiseaseExplanation));
    }

    #[test]
    fn matches_exact_on_single_disease_support() {
        // Exact joint restricted to the single-disease hypotheses, renormalized.
        let net = Network::new(
            "mx",
            vec![0.01, 0.02, 0.03],
            2,
            [(0, 0, 0.9), (1, 0, 0.5), (2, 0, 0.2), (1, 1, 0.3)],
        )
        .unwrap();
        let ev = Evidence::new(2, [0], [1]).unwrap();
        let tb = tabular_bayes(&net, &ev).unwrap();
        let mut single = [0.0; 3];
        for i in 0..3 {
            let h = crate::network::Hypothesis::from_present(3, [i]);
            single[i] = crate::network::log_joint(&net, &ev, &h).prob();
        }
        let z: f64 = single.iter().sum();
        for i in 0..3 {
            assert_relative_eq!(tb[i], single[i] / z, epsilon = 1e-12);
        }
    }

    #[test]
    fn itb_single_finding_single_parent() {
        let net = Network::new("i", vec![0.1, 0.1, 0.1], 2, [(1, 0, 0.5), (2, 1, 0.5)]).unwrap();
        let ev = Evidence::new(2, [0], []).unwrap();
        assert_eq!(itb_importance_set(&net, &ev, 25).members(), &[1]);
    }

    #[test]
    fn itb_disjoint_findings_need_two_rounds() {
        let net = Network::new("i", vec![0.1, 0.1, 0.1], 2, [(0, 0, 0.5), (2, 1, 0.5)]).unwrap();
        let ev = Evidence::new(2, [0, 1], []).unwrap();
        assert_eq!(itb_importance_set(&net, &ev, 25).members(), &[0, 2]);
        assert_eq!(itb_importance_set(&net, &ev, 1).members(), &[0]);
    }

    #[test]
    fn itb_empty_positive_evidence() {
        let net = Network::new("i", vec![0.1], 1, [(0, 0, 0.5)]).unwrap();
        let ev = Evidence::new(1, [], [0]).unwrap();
        assert!(itb_importance_set(&net, &ev, 25).is_empty());
    }

    #[test]
    fn itb_prefers_the_stronger_explanation_and_breaks_ties_low() {
        let net = Network::new(
            "t",
            vec![0.1, 0.1, 0.1],
            1,
            [(0, 0, 0.5), (1, 0, 0.5), (2, 0, 0.2)],
        )
        .unwrap();
        let ev = Evidence::new(1, [0], []).unwrap();
        assert_eq!(itb_importance_set(&net, &ev, 25).members(), &[0]);
    }

    #[test]
    fn initial_distribution_examples() {
        let priors: Vec<f64> = vec![2e-4; 25].into_iter().chain([2e-4, 0.01]).collect();
        let net = Network::new("d", priors, 0, []).unwrap();
        let his = ImportanceSet::new(0..25);
        let d = initial_sampling_distribution(&net, &his, 1e-3).unwrap();
        assert_eq!(d.original()[0], 0.04);
        assert_eq!(d.original()[25], 1e-3);
        assert_eq!(d.original()[26], 0.01);

        let none = initial_sampling_distribution(&net, &ImportanceSet::default(), 1e-3).unwrap();
        assert_eq!(none.original()[0], 1e-3);
        assert_eq!(none.original()[26], 0.01);

        // a lone member gets 1/2, same as each of two members
        let one = initial_sampling_distribution(&net, &ImportanceSet::new([3]), 1e-3).unwrap();
        assert_eq!(one.original()[3], 0.5);
        let two = initial_sampling_distribution(&net, &ImportanceSet::new([3, 4]), 1e-3).unwrap();
        assert_eq!(two.original()[3], 0.5);
        assert!(one.original().iter().all(|&p| p > 0.0));
    }
}
