//! Synthetic QMR-shaped networks and cases.
//!
//! The real knowledge base is not available, so networks are drawn to match
//! its published shape: 534 diseases, 4040 findings and about ten parents per
//! finding, with link probabilities taken from the five frequency codes.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::engine::seeded_rng;
use crate::error::{Error, Result};
use crate::network::{finding_likelihood, Evidence, FindingState, Hypothesis, Network, FREQUENCY_TABLE};

/// Where link probabilities come from.
#[derive(Debug, Clone, PartialEq)]
pub enum LinkSource {
    /// Frequency codes 1..=5 drawn with these relative weights.
    Frequencies([f64; 5]),
    /// q drawn uniformly from [lo, hi].
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub name: String,
    pub diseases: usize,
    pub findings: usize,
    /// Mean number of parent diseases per finding (at least 1).
    pub mean_arcs: f64,
    /// Over-dispersion of the extra-parent count: 0 gives Poisson, larger
    /// values give a heavier-tailed negative binomial.
    pub dispersion: f64,
    /// Priors are log-uniform on this range.
    pub prior_range: (f64, f64),
    pub links: LinkSource,
    pub seed: u64,
}

impl GeneratorParams {
    /// 534 diseases, 4040 findings, 40,740 arcs on average.
    pub fn qmr_scale(seed: u64) -> GeneratorParams {
        GeneratorParams {
            name: format!("qmr-synthetic-{seed}"),
            diseases: 534,
            findings: 4040,
            mean_arcs: 40_740.0 / 4040.0,
            dispersion: 0.5,
            prior_range: (1e-4, 5e-2),
            links: LinkSource::Frequencies([1.0; 5]),
            seed,
        }
    }

    /// A desk-scale network small enough for exact enumeration.
    pub fn small(diseases: usize, findings: usize, seed: u64) -> GeneratorParams {
        GeneratorParams {
            name: format!("small-{diseases}x{findings}-{seed}"),
            diseases,
            findings,
            mean_arcs: 3.0_f64.min(diseases as f64),
            dispersion: 0.3,
            prior_range: (1e-3, 0.1),
            links: LinkSource::Frequencies([1.0; 5]),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.diseases < 1 || self.findings < 1 {
            return bad("need at least one disease and one finding".into());
        }
        if !(self.mean_arcs >= 1.0 && self.mean_arcs <= self.diseases as f64) {
            return bad(format!(
                "mean arcs per finding {} must be in [1, {}]",
                self.mean_arcs, self.diseases
            ));
        }
        if !(self.dispersion >= 0.0) {
            return bad(format!("dispersion {} must be non-negative", self.dispersion));
        }
        let (lo, hi) = self.prior_range;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return bad(format!("prior range ({lo}, {hi}) must satisfy 0 < lo <= hi < 1"));
        }
        match &self.links {
            LinkSource::Frequencies(w) => {
                if w.iter().any(|&x| !(x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                    return bad("frequency weights must be non-negative with a positive sum".into());
                }
            }
            LinkSource::Uniform { lo, hi } => {
                if !(*lo > 0.0 && lo <= hi && *hi <= 1.0) {
                    return bad(format!("link range ({lo}, {hi}) must satisfy 0 < lo <= hi <= 1"));
                }
            }
        }
        Ok(())
    }
}

fn draw_link<R: Rng>(rng: &mut R, links: &LinkSource) -> f64 {
    match links {
        LinkSource::Frequencies(w) => {
            let total: f64 = w.iter().sum();
            let mut u = rng.random::<f64>() * total;
            for (k, &wk) in w.iter().enumerate() {
                if u < wk {
                    return FREQUENCY_TABLE[k];
                }
                u -= wk;
            }
            FREQUENCY_TABLE[w.iter().rposition(|&x| x > 0.0).unwrap_or(4)]
        }
        LinkSource::Uniform { lo, hi } => {
            if lo == hi {
                *lo
            } else {
                rng.random_range(*lo..=*hi)
            }
        }
    }
}

/// Draw a network. Deterministic for a fixed seed.
pub fn generate_network(params: &GeneratorParams) -> Result<Network> {
    params.validate()?;
    let mut rng = seeded_rng(params.seed);
    let n = params.diseases;
    let (lo, hi) = params.prior_range;
    let priors: Vec<f64> = (0..n)
        .map(|_| {
            if lo == hi {
                lo
            } else {
                (rng.random_range(lo.ln()..hi.ln())).exp()
            }
        })
        .collect();

    let extra = params.mean_arcs - 1.0;
    let gamma = if params.dispersion > 0.0 && extra > 0.0 {
        Some(
            Gamma::new(1.0 / params.dispersion, extra * params.dispersion)
                .map_err(|e| Error::InvalidConfig(e.to_string()))?,
        )
    } else {
        None
    };
    let mut arcs = Vec::new();
    for j in 0..params.findings {
        let lambda = match &gamma {
            Some(g) => g.sample(&mut rng),
            None => extra,
        };
        let more = if lambda > 0.0 {
            Poisson::new(lambda)
                .map_err(|e| Error::InvalidConfig(e.to_string()))?
                .sample(&mut rng) as usize
        } else {
            0
        };
        let k = (1 + more).min(n);
        let mut parents = index::sample(&mut rng, n, k).into_vec();
        parents.sort_unstable();
        for i in parents {
            arcs.push((i, j, draw_link(&mut rng, &params.links)));
        }
    }
    Network::new(params.name.clone(), priors, params.findings, arcs)
}

/// A test case: evidence plus, for synthetic cases, the diseases it was drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseSpec {
    pub name: String,
    pub evidence: Evidence,
    pub diagnosis: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseTargets {
    pub diagnosis: usize,
    pub present: usize,
    pub absent: usize,
}

impl CaseTargets {
    /// 5 diseases, 51 present, 2 absent
    pub const CPC1: CaseTargets = CaseTargets {
        diagnosis: 5,
        present: 51,
        absent: 2,
    };
    /// 3 diseases, 50 present, 24 absent
    pub const CPC2: CaseTargets = CaseTargets {
        diagnosis: 3,
        present: 50,
        absent: 24,
    };
}

const CASE_ATTEMPTS: usize = 1000;

/// Draw a diagnosis, forward-sample its children through the noisy-OR and
/// keep `present` of the findings that came out present; absent findings are
/// taken from findings with no parent in the diagnosis.
pub fn generate_case(
    net: &Network,
    name: impl Into<String>,
    targets: CaseTargets,
    seed: u64,
) -> Result<CaseSpec> {
    let n = net.diseases();
    let m = net.findings();
    if targets.diagnosis < 1 || targets.diagnosis > n {
        return Err(Error::InvalidConfig(format!(
            "diagnosis size {} must be in 1..={n}",
            targets.diagnosis
        )));
    }
    if targets.present + targets.absent > m {
        return Err(Error::InvalidConfig(format!(
            "{} observed findings requested but the network has {m}",
            targets.present + targets.absent
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut best = (0usize, 0usize);
    for _ in 0..CASE_ATTEMPTS {
        let mut diagnosis = index::sample(&mut rng, n, targets.diagnosis).into_vec();
        diagnosis.sort_unstable();
        let h = Hypothesis::from_present(n, diagnosis.iter().copied());
        let mut is_child = vec![false; m];
        for &i in &diagnosis {
            for l in net.children(i) {
                is_child[l.node] = true;
            }
        }
        let mut positives = Vec::new();
        for j in (0..m).filter(|&j| is_child[j]) {
            let p = finding_likelihood(net, j, FindingState::Present, &h);
            if rng.random::<f64>() < p {
                positives.push(j);
            }
        }
        let negatives: Vec<usize> = (0..m).filter(|&j| !is_child[j]).collect();
        best = (best.0.max(positives.len()), best.1.max(negatives.len()));
        if positives.len() < targets.present || negatives.len() < targets.absent {
            continue;
        }
        let pick = |rng: &mut _, pool: &[usize], k: usize| {
            let mut v: Vec<usize> = index::sample(rng, pool.len(), k)
                .into_iter()
                .map(|x| pool[x])
                .collect();
            v.sort_unstable();
            v
        };
        let present = pick(&mut rng, &positives, targets.present);
        let absent = pick(&mut rng, &negatives, targets.absent);
        return Ok(CaseSpec {
            name: name.into(),
            evidence: Evidence::new(m, present, absent)?,
            diagnosis: Some(diagnosis),
        });
    }
    Err(Error::CaseGeneration {
        attempts: CASE_ATTEMPTS,
        detail: format!(
            "needed {} present and {} absent; best draw had {} present and {} absent candidates",
            targets.present, targets.absent, best.0, best.1
        ),
    })
}
