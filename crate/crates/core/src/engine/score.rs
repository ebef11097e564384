//! Sample scores and Markov blanket posteriors for one fixed evidence set.
//!
//! [`TrialScorer`] indexes the observed findings once so that scoring a trial
//! touches only arcs into N_F. Scoring leaves a [`LikelihoodCache`] holding,
//! for each observed finding, the noisy-OR failure product over its present
//! parents. The Markov blanket pass flips one disease at a time by dividing
//! out or multiplying in a single `(1 − q)` factor from that cache.

use crate::engine::sampling::SamplingDistribution;
use crate::network::{finding_likelihood, Evidence, FindingState, Hypothesis, LogProb, Network};

/// Below this a cached failure product is treated as underflowed and the
/// disease is rescored in log space.
const TINY: f64 = 1e-280;

#[derive(Debug, Clone, Copy)]
struct ParentLink {
    disease: usize,
    log_fail: f64,
    certain: bool,
}

#[derive(Debug, Clone, Copy)]
struct BlanketLink {
    slot: usize,
    /// the finding is observed present
    present: bool,
    fail: f64,
    inv_fail: f64,
    log_fail: f64,
    certain: bool,
}

#[derive(Debug, Clone)]
struct Slot {
    finding: usize,
    present: bool,
    parents: Vec<ParentLink>,
}

/// Noisy-OR state of one observed finding under the current hypothesis.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SlotState {
    /// present parents
    active: u32,
    /// present parents with q = 1
    certain: u32,
    /// Σ ln(1 − q) over present parents with q < 1
    log_fail: f64,
    /// exp(log_fail)
    fail: f64,
    /// likelihood of the observed state, filled in by scoring
    lik: f64,
}

/// Above this failure product, 1 − fail loses too many digits and the
/// likelihood is taken from expm1 instead.
const LINEAR_LIMIT: f64 = 0.999;

impl SlotState {
    fn likelihood(&self, present: bool) -> f64 {
        if present {
            if self.certain > 0 {
                1.0
            } else if self.active == 0 {
                0.0
            } else {
                -self.log_fail.exp_m1()
            }
        } else if self.certain > 0 {
            0.0
        } else if self.active == 0 {
            1.0
        } else {
            self.fail
        }
    }

    fn log_likelihood(&self, present: bool) -> LogProb {
        if present {
            if self.certain > 0 {
                LogProb::ONE
            } else if self.active == 0 {
                LogProb::Zero
            } else {
                LogProb::from_prob(-self.log_fail.exp_m1())
            }
        } else if self.certain > 0 {
            LogProb::Zero
        } else {
            LogProb::Ln(self.log_fail)
        }
    }

    /// Likelihood of the observed state with one parent added or removed,
    /// without the log bookkeeping of [`SlotState::with`].
    fn flipped_likelihood(&self, link: &BlanketLink, add: bool, present: bool) -> f64 {
        let (active, certain, fail) = if add {
            let fail = if link.certain { self.fail } else { self.fail * link.fail };
            (self.active + 1, self.certain + u32::from(link.certain), fail)
        } else {
            let fail = if link.certain { self.fail } else { self.fail * link.inv_fail };
            (self.active - 1, self.certain - u32::from(link.certain), fail)
        };
        match (present, certain > 0, active == 0) {
            (true, true, _) => 1.0,
            (true, false, true) => 0.0,
            (true, false, false) if fail < LINEAR_LIMIT => 1.0 - fail,
            (true, false, false) => self.with(link, add).likelihood(true),
            (false, true, _) => 0.0,
            (false, false, true) => 1.0,
            (false, false, false) => fail,
        }
    }

    fn with(&self, link: &BlanketLink, add: bool) -> SlotState {
        let mut s = *self;
        if add {
            s.active += 1;
            if link.certain {
                s.certain += 1;
            } else {
                s.log_fail += link.log_fail;
                s.fail *= link.fail;
            }
        } else {
            s.active -= 1;
            if link.certain {
                s.certain -= 1;
            } else {
                s.log_fail -= link.log_fail;
                s.fail /= link.fail;
            }
        }
        if s.active == 0 {
            s.log_fail = 0.0;
            s.fail = 1.0;
        }
        s
    }
}

/// Per-observed-finding likelihood state left behind by scoring a trial.
#[derive(Debug, Clone, Default)]
pub struct LikelihoodCache {
    slots: Vec<SlotState>,
}

impl LikelihoodCache {
    /// P(f_j | H) for the k-th observed finding (present findings first).
    pub fn likelihood(&self, scorer: &TrialScorer<'_>, k: usize) -> f64 {
        self.slots[k].likelihood(scorer.slots[k].present)
    }
}

/// Score of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialScore {
    /// ln Z = ln P(N_F | H) + ln P(H) − ln P′(H)
    pub log_score: LogProb,
    /// ln P(N_F, H)
    pub log_joint: LogProb,
    pub log_likelihood: LogProb,
    pub log_prior: f64,
    pub log_proposal: f64,
}

/// Evidence-specific index over a network.
#[derive(Debug, Clone)]
pub struct TrialScorer<'a> {
    net: &'a Network,
    slots: Vec<Slot>,
    /// CSR index: blanket[offsets[i]..offsets[i + 1]] are D_i's observed children
    offsets: Vec<usize>,
    blanket: Vec<BlanketLink>,
    prior_log_all_absent: f64,
    prior_log_odds: Vec<f64>,
}

impl<'a> TrialScorer<'a> {
    pub fn new(net: &'a Network, ev: &Evidence) -> TrialScorer<'a> {
        let n = net.diseases();
        let slots: Vec<Slot> = ev
            .observations()
            .map(|(j, state)| Slot {
                finding: j,
                present: state == FindingState::Present,
                parents: net
                    .parents(j)
                    .iter()
                    .map(|l| ParentLink {
                        disease: l.node,
                        log_fail: (-l.q).ln_1p(),
                        certain: l.q >= 1.0,
                    })
                    .collect(),
            })
            .collect();
        let mut per_disease: Vec<Vec<BlanketLink>> = vec![Vec::new(); n];
        for (k, slot) in slots.iter().enumerate() {
            for p in &slot.parents {
                per_disease[p.disease].push(BlanketLink {
                    slot: k,
                    present: slot.present,
                    fail: p.log_fail.exp(),
                    inv_fail: (-p.log_fail).exp(),
                    log_fail: p.log_fail,
                    certain: p.certain,
                });
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let mut blanket = Vec::new();
        for links in per_disease {
            blanket.extend(links);
            offsets.push(blanket.len());
        }
        let priors = net.priors();
        TrialScorer {
            net,
            slots,
            offsets,
            blanket,
            prior_log_all_absent: priors.iter().map(|&p| (-p).ln_1p()).sum(),
            prior_log_odds: priors.iter().map(|&p| p.ln() - (-p).ln_1p()).collect(),
        }
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    /// Number of observed findings.
    pub fn observed(&self) -> usize {
        self.slots.len()
    }

    /// Finding index of the k-th observation.
    pub fn finding(&self, k: usize) -> usize {
        self.slots[k].finding
    }

    /// Σ_i |S(D_i) ∩ N_F|: the per-trial extra work of the blanket pass.
    pub fn blanket_size(&self) -> usize {
        self.blanket.len()
    }

    pub fn new_cache(&self) -> LikelihoodCache {
        LikelihoodCache {
            slots: vec![SlotState::default(); self.slots.len()],
        }
    }

    /// ln P(H) from precomputed prior odds.
    pub fn log_prior(&self, h: &Hypothesis) -> f64 {
        self.prior_log_all_absent + h.present().map(|i| self.prior_log_odds[i]).sum::<f64>()
    }

    /// Score `h` against the evidence, refilling `cache`.
    pub fn score(
        &self,
        h: &Hypothesis,
        dist: &SamplingDistribution,
        cache: &mut LikelihoodCache,
    ) -> TrialScore {
        cache.slots.resize(self.slots.len(), SlotState::default());
        let mut log_likelihood = LogProb::ONE;
        for (slot, state) in self.slots.iter().zip(cache.slots.iter_mut()) {
            let mut s = SlotState::default();
            for p in &slot.parents {
                if h.get(p.disease) {
                    s.active += 1;
                    if p.certain {
                        s.certain += 1;
                    } else {
                        s.log_fail += p.log_fail;
                    }
                }
            }
            s.fail = s.log_fail.exp();
            s.lik = s.likelihood(slot.present);
            *state = s;
            log_likelihood = log_likelihood * s.log_likelihood(slot.present);
        }
        let log_prior = self.log_prior(h);
        let log_proposal = dist.log_prob(h).ln().unwrap_or(f64::NEG_INFINITY);
        let log_joint = LogProb::Ln(log_prior) * log_likelihood;
        TrialScore {
            log_score: log_joint / LogProb::Ln(log_proposal),
            log_joint,
            log_likelihood,
            log_prior,
            log_proposal,
        }
    }

    /// Observed findings whose likelihood under the cached hypothesis is zero.
    pub fn zero_findings<'c>(&'c self, cache: &'c LikelihoodCache) -> impl Iterator<Item = usize> + 'c {
        self.slots
            .iter()
            .zip(&cache.slots)
            .filter(|(slot, s)| s.likelihood(slot.present) == 0.0)
            .map(|(slot, _)| slot.finding)
    }

    /// P(d_i = present | w_{D_i}) for every disease, written into `out`.
    ///
    /// `cache` must come from scoring `h`. If that score was zero the
    /// posteriors are recomputed from scratch per state.
    pub fn markov_blanket(
        &self,
        h: &Hypothesis,
        score: &TrialScore,
        cache: &LikelihoodCache,
        out: &mut [f64],
    ) {
        if score.log_joint.is_zero() {
            let full = markov_blanket_recompute(self.net, &self.evidence(), h);
            out.copy_from_slice(&full);
            return;
        }
        for (i, slot_out) in out.iter_mut().enumerate() {
            let links = &self.blanket[self.offsets[i]..self.offsets[i + 1]];
            let prior = self.net.prior(i);
            if links.is_empty() {
                *slot_out = prior;
                continue;
            }
            let is_present = h.get(i);
            *slot_out = match self.blanket_linear(links, is_present, cache) {
                Some((with, without)) => {
                    let a = prior * with;
                    let b = (1.0 - prior) * without;
                    if a + b > 0.0 {
                        a / (a + b)
                    } else {
                        prior
                    }
                }
                None => self.blanket_log(i, links, is_present, cache),
            };
        }
    }

    /// Products of child likelihoods with D_i present and absent, in linear
    /// space with a shared rescale. `None` if a cached product underflowed.
    fn blanket_linear(
        &self,
        links: &[BlanketLink],
        is_present: bool,
        cache: &LikelihoodCache,
    ) -> Option<(f64, f64)> {
        let mut with = 1.0;
        let mut without = 1.0;
        for link in links {
            let cur = &cache.slots[link.slot];
            if cur.fail < TINY && cur.certain == 0 {
                return None;
            }
            let flipped = cur.flipped_likelihood(link, !is_present, link.present);
            let (p_with, p_without) = if is_present {
                (cur.lik, flipped)
            } else {
                (flipped, cur.lik)
            };
            with *= p_with;
            without *= p_without;
            let big = with.max(without);
            if big > 0.0 && big < 1e-200 {
                with *= 1e200;
                without *= 1e200;
            }
        }
        Some((with, without))
    }

    fn blanket_log(
        &self,
        i: usize,
        links: &[BlanketLink],
        is_present: bool,
        cache: &LikelihoodCache,
    ) -> f64 {
        let mut with = LogProb::Ln(self.net.prior(i).ln());
        let mut without = LogProb::Ln((-self.net.prior(i)).ln_1p());
        for link in links {
            let cur = &cache.slots[link.slot];
            let present = self.slots[link.slot].present;
            let flipped = cur.with(link, !is_present);
            let (a, b) = if is_present { (cur, &flipped) } else { (&flipped, cur) };
            with = with * a.log_likelihood(present);
            without = without * b.log_likelihood(present);
        }
        normalize_pair(with, without).unwrap_or(self.net.prior(i))
    }

    fn evidence(&self) -> Evidence {
        let present = self.slots.iter().filter(|s| s.present).map(|s| s.finding);
        let absent = self.slots.iter().filter(|s| !s.present).map(|s| s.finding);
        Evidence::new(self.net.findings(), present, absent).expect("scorer evidence is valid")
    }
}

/// a / (a + b) for two log-weights; `None` when both are zero.
fn normalize_pair(a: LogProb, b: LogProb) -> Option<f64> {
    match (a, b) {
        (LogProb::Zero, LogProb::Zero) => None,
        (LogProb::Zero, _) => Some(0.0),
        (_, LogProb::Zero) => Some(1.0),
        (LogProb::Ln(x), LogProb::Ln(y)) => Some(1.0 / (1.0 + (y - x).exp())),
    }
}

/// Score one trial from scratch. Allocates; the engine uses [`TrialScorer`].
pub fn sample_score(
    net: &Network,
    ev: &Evidence,
    h: &Hypothesis,
    dist: &SamplingDistribution,
) -> (TrialScore, LikelihoodCache) {
    let scorer = TrialScorer::new(net, ev);
    let mut cache = scorer.new_cache();
    let score = scorer.score(h, dist, &mut cache);
    (score, cache)
}

/// Markov blanket posteriors using the cache from [`sample_score`].
pub fn markov_blanket_posteriors(
    net: &Network,
    ev: &Evidence,
    h: &Hypothesis,
    score: &TrialScore,
    cache: &LikelihoodCache,
) -> Vec<f64> {
    let scorer = TrialScorer::new(net, ev);
    let mut out = vec![0.0; net.diseases()];
    scorer.markov_blanket(h, score, cache, &mut out);
    out
}

/// Markov blanket posteriors evaluated per state directly from the noisy-OR
/// definition, without any cache. Diseases whose blanket states are both
/// impossible get their prior.
pub fn markov_blanket_recompute(net: &Network, ev: &Evidence, h: &Hypothesis) -> Vec<f64> {
    let mut work = h.clone();
    (0..net.diseases())
        .map(|i| {
            let prior = net.prior(i);
            let mut weight = |present: bool| {
                work.set(i, present);
                let base = if present { prior } else { 1.0 - prior };
                net.children(i)
                    .iter()
                    .filter_map(|l| ev.state_of(l.node).map(|s| (l.node, s)))
                    .fold(LogProb::from_prob(base), |acc, (j, s)| {
                        acc * LogProb::from_prob(finding_likelihood(net, j, s, &work))
                    })
            };
            let with = weight(true);
            let without = weight(false);
            work.set(i, h.get(i));
            normalize_pair(with, without).unwrap_or(prior)
        })
        .collect()
}
