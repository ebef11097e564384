//! Evaluation instruments: rank-anchored top-k correlation, log-joint
//! histograms, upper-tail outliers, cardinality profiles and convergence
//! series.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use crate::engine::{Checkpoint, TrialRecord};
use crate::error::{Error, Result};
use crate::network::LogProb;

pub const DEFAULT_TOP_K: usize = 20;

/// Per-disease probabilities with the ranking (probability desc, index asc).
#[derive(Debug, Clone, PartialEq)]
pub struct RankedDistribution {
    probs: Vec<f64>,
    order: Vec<usize>,
}

impl RankedDistribution {
    pub fn new(probs: Vec<f64>) -> RankedDistribution {
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        RankedDistribution { probs, order }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Disease indices, most probable first.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// 1-based rank of each disease.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.probs.len()];
        for (k, &i) in self.order.iter().enumerate() {
            r[i] = k + 1;
        }
        r
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// A correlation that may be undefined because one side had zero variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    Defined(f64),
    Undefined,
}

impl Correlation {
    pub fn value(self) -> Option<f64> {
        match self {
            Correlation::Defined(r) => Some(r),
            Correlation::Undefined => None,
        }
    }
}

impl fmt::Display for Correlation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Correlation::Defined(r) => write!(f, "{r}"),
            Correlation::Undefined => f.write_str("undefined"),
        }
    }
}

/// r(A, B): Pearson correlation over A's top-k diseases of the pairs
/// (P_A, P_B). Asymmetric, since only A decides which diseases are compared.
pub fn topk_correlation(a: &RankedDistribution, b: &[f64], k: usize) -> Result<Correlation> {
    let n = a.len();
    if k < 2 || k > n || b.len() != n {
        return Err(Error::TopK { k, n: n.min(b.len()) });
    }
    let top = &a.order[..k];
    let xs: Vec<f64> = top.iter().map(|&i| a.probs[i]).collect();
    let ys: Vec<f64> = top.iter().map(|&i| b[i]).collect();
    let kf = k as f64;
    let mx = xs.iter().sum::<f64>() / kf;
    let my = ys.iter().sum::<f64>() / kf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Correlation::Undefined);
    }
    Ok(Correlation::Defined((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

/// Histogram of log₁₀ P(N_F, H) over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct JointHistogram {
    pub bin_width: f64,
    /// bin index b covers [b·width, (b+1)·width)
    pub bins: BTreeMap<i64, u64>,
    /// Trials whose joint was exactly zero.
    pub zero: u64,
    /// log₁₀ P(N_F, ∅): where the null-hypothesis spike sits.
    pub null_log10_joint: Option<f64>,
    /// Trials that sampled the null hypothesis.
    pub null_count: u64,
}

impl JointHistogram {
    pub fn bin_of(&self, log10: f64) -> i64 {
        (log10 / self.bin_width).floor() as i64
    }

    pub fn total(&self) -> u64 {
        self.bins.values().sum::<u64>() + self.zero
    }
}

/// Bin trial log-joints. `null_joint` is the exact joint of the all-absent
/// hypothesis, reported alongside so its spike can be identified.
pub fn joint_log_histogram(
    records: &[TrialRecord],
    bin_width: f64,
    null_joint: LogProb,
) -> Result<JointHistogram> {
    if !(bin_width > 0.0) {
        return Err(Error::InvalidConfig(format!("bin width {bin_width} must be positive")));
    }
    let mut hist = JointHistogram {
        bin_width,
        bins: BTreeMap::new(),
        zero: 0,
        null_log10_joint: null_joint.log10(),
        null_count: 0,
    };
    for r in records {
        if r.h_plus == 0 {
            hist.null_count += 1;
        }
        match r.log_joint.log10() {
            Some(v) => *hist.bins.entry(hist.bin_of(v)).or_insert(0) += 1,
            None => hist.zero += 1,
        }
    }
    Ok(hist)
}

/// Rule for flagging upper-tail outliers among trial log-joints.
///
/// The `window` largest log₁₀-joints form the upper tail. A trial is flagged
/// when its log₁₀-joint exceeds median(tail) + `mads`·MAD(tail).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierRule {
    pub window: usize,
    pub mads: f64,
}

impl Default for OutlierRule {
    fn default() -> Self {
        OutlierRule {
            window: 100,
            mads: 3.0,
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Outlier threshold in log₁₀ units, or `None` with no nonzero trials.
pub fn outlier_threshold(records: &[TrialRecord], rule: OutlierRule) -> Result<Option<f64>> {
    if rule.window < 10 {
        return Err(Error::InvalidConfig(format!(
            "outlier window {} must be at least 10",
            rule.window
        )));
    }
    let mut logs: Vec<f64> = records.iter().filter_map(|r| r.log_joint.log10()).collect();
    if logs.is_empty() {
        return Ok(None);
    }
    logs.sort_by(|a, b| b.total_cmp(a));
    logs.truncate(rule.window);
    logs.reverse();
    let med = median(&logs);
    let mut dev: Vec<f64> = logs.iter().map(|v| (v - med).abs()).collect();
    dev.sort_by(f64::total_cmp);
    Ok(Some(med + rule.mads * median(&dev)))
}

/// Records whose log-joint lies above the upper-tail threshold.
pub fn upper_tail_outliers(records: &[TrialRecord], rule: OutlierRule) -> Result<Vec<TrialRecord>> {
    let Some(threshold) = outlier_threshold(records, rule)? else {
        return Ok(Vec::new());
    };
    Ok(records
        .iter()
        .filter(|r| r.log_joint.log10().is_some_and(|v| v > threshold))
        .copied()
        .collect())
}

/// Mean |H⁺| per log₁₀-joint bin (zero-joint trials are left out).
pub fn cardinality_profile(records: &[TrialRecord], bin_width: f64) -> Result<BTreeMap<i64, f64>> {
    if !(bin_width > 0.0) {
        return Err(Error::InvalidConfig(format!("bin width {bin_width} must be positive")));
    }
    let mut sums: BTreeMap<i64, (u64, u64)> = BTreeMap::new();
    for r in records {
        if let Some(v) = r.log_joint.log10() {
            let e = sums.entry((v / bin_width).floor() as i64).or_insert((0, 0));
            e.0 += r.h_plus as u64;
            e.1 += 1;
        }
    }
    Ok(sums
        .into_iter()
        .map(|(b, (s, c))| (b, s as f64 / c as f64))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub trial: u64,
    pub elapsed: Duration,
    pub r: Correlation,
}

/// r(reference, checkpoint) at every checkpoint. Checkpoints taken before
/// any nonzero score give an undefined point.
pub fn convergence_series(
    checkpoints: &[Checkpoint],
    reference: &RankedDistribution,
    k: usize,
) -> Result<Vec<SeriesPoint>> {
    checkpoints
        .iter()
        .map(|c| {
            let r = match &c.estimates {
                Some(e) => topk_correlation(reference, e, k)?,
                None => Correlation::Undefined,
            };
            Ok(SeriesPoint {
                trial: c.trial,
                elapsed: c.elapsed,
                r,
            })
        })
        .collect()
}
