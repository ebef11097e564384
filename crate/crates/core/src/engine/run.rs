//! Likelihood-weighting simulation with optional Markov blanket scoring,
//! heuristic initialization and self-importance updating.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::engine::estimate::EstimateTable;
use crate::engine::sampling::{SamplingDistribution, TrialStreams};
use crate::engine::score::TrialScorer;
use crate::error::{Error, Result};
use crate::heuristics::{
    initial_sampling_distribution, itb_importance_set, ImportanceSet, DEFAULT_FLOOR,
    DEFAULT_ITB_ROUNDS,
};
use crate::network::{Evidence, Hypothesis, LogProb, Network};

/// The named algorithm variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Everything on.
    S,
    /// No Markov blanket scoring.
    NoMarkovBlanket,
    /// P′₀ from floored priors instead of the heuristic-importance set.
    NoItb,
    /// No self-importance updates.
    NoSelfImportance,
    /// Long reference run: S with the slower reference update schedule.
    Reference,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::S,
        Variant::NoMarkovBlanket,
        Variant::NoItb,
        Variant::NoSelfImportance,
        Variant::Reference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::S => "S",
            Variant::NoMarkovBlanket => "S/NMBS",
            Variant::NoItb => "S/NITB",
            Variant::NoSelfImportance => "S/NSI",
            Variant::Reference => "REF",
        }
    }

    /// Name usable as a path component.
    pub fn slug(self) -> &'static str {
        match self {
            Variant::S => "S",
            Variant::NoMarkovBlanket => "S-NMBS",
            Variant::NoItb => "S-NITB",
            Variant::NoSelfImportance => "S-NSI",
            Variant::Reference => "REF",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Variant> {
        let key = s.trim().to_ascii_uppercase().replace('-', "/");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant {s:?}")))
    }
}

/// When P′ is updated and how strongly: g(t) = t / g_scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateSchedule {
    /// First update after this many trials.
    pub start: u64,
    /// Then every this many trials.
    pub every: u64,
    pub g_scale: f64,
}

impl UpdateSchedule {
    /// 10,000 / 5,000 / g = t/10,000
    pub const S: UpdateSchedule = UpdateSchedule {
        start: 10_000,
        every: 5_000,
        g_scale: 10_000.0,
    };

    /// 20,000 / 10,000 / g = t/20,000
    pub const REFERENCE: UpdateSchedule = UpdateSchedule {
        start: 20_000,
        every: 10_000,
        g_scale: 20_000.0,
    };

    pub fn is_update_point(&self, t: u64) -> bool {
        t == self.start || (t > self.start && (t - self.start) % self.every == 0)
    }

    /// g(t), with t the number of trials completed so far.
    pub fn g(&self, t: u64) -> f64 {
        t as f64 / self.g_scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    Trials(u64),
    WallTime(Duration),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantConfig {
    pub markov_blanket_scoring: bool,
    pub self_importance: bool,
    pub use_itb_init: bool,
    pub schedule: UpdateSchedule,
    pub floor: f64,
    pub itb_rounds: usize,
    pub seed: u64,
    pub budget: Budget,
    /// Snapshot the estimates every this many trials.
    pub checkpoint_every: u64,
    /// Keep one [`TrialRecord`] per trial.
    pub record_trials: bool,
}

impl VariantConfig {
    pub fn for_variant(variant: Variant, budget: Budget, seed: u64) -> VariantConfig {
        let base = VariantConfig {
            markov_blanket_scoring: true,
            self_importance: true,
            use_itb_init: true,
            schedule: UpdateSchedule::S,
            floor: DEFAULT_FLOOR,
            itb_rounds: DEFAULT_ITB_ROUNDS,
            seed,
            budget,
            checkpoint_every: 5_000,
            record_trials: true,
        };
        match variant {
            Variant::S => base,
            Variant::NoMarkovBlanket => VariantConfig {
                markov_blanket_scoring: false,
                ..base
            },
            Variant::NoItb => VariantConfig {
                use_itb_init: false,
                ..base
            },
            Variant::NoSelfImportance => VariantConfig {
                self_importance: false,
                ..base
            },
            Variant::Reference => VariantConfig {
                schedule: UpdateSchedule::REFERENCE,
                ..base
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let s = &self.schedule;
        if s.start < 1 || s.every < 1 {
            return Err(Error::InvalidConfig(
                "update start and interval must be at least 1".into(),
            ));
        }
        if !(s.g_scale > 0.0) {
            return Err(Error::InvalidConfig(format!("g_scale {} must be positive", s.g_scale)));
        }
        if !(self.floor > 0.0 && self.floor < 0.5) {
            return Err(Error::InvalidConfig(format!("floor {} must be in (0, 0.5)", self.floor)));
        }
        if self.checkpoint_every < 1 {
            return Err(Error::InvalidConfig("checkpoint interval must be at least 1".into()));
        }
        match self.budget {
            Budget::Trials(0) => Err(Error::InvalidConfig("trial budget is zero".into())),
            Budget::WallTime(d) if d.is_zero() => {
                Err(Error::InvalidConfig("time budget is zero".into()))
            }
            _ => Ok(()),
        }
    }
}

/// One simulated trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    /// 1-based trial index.
    pub trial: u64,
    pub log_score: LogProb,
    pub log_joint: LogProb,
    /// |H⁺|
    pub h_plus: u32,
    pub elapsed: Duration,
}

/// Estimates at a point during the run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub trial: u64,
    pub elapsed: Duration,
    /// `None` while no trial has scored above zero.
    pub estimates: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub estimates: Vec<f64>,
    pub table: EstimateTable,
    pub records: Vec<TrialRecord>,
    pub checkpoints: Vec<Checkpoint>,
    pub trials: u64,
    pub elapsed: Duration,
    pub importance_set: ImportanceSet,
    pub distribution: SamplingDistribution,
    /// Trial indices at which P′ was updated.
    pub updates: Vec<u64>,
    /// Update points skipped because the total score was still zero.
    pub skipped_updates: Vec<u64>,
}

impl RunOutput {
    pub fn trials_per_minute(&self) -> f64 {
        let mins = self.elapsed.as_secs_f64() / 60.0;
        if mins > 0.0 {
            self.trials as f64 / mins
        } else {
            f64::INFINITY
        }
    }
}

/// P′_new = (P′₀ + g·P̂) / (g + 1), clamped into [floor, 1 − floor].
pub fn self_importance_update(
    dist: &mut SamplingDistribution,
    estimates: &[f64],
    g: f64,
    floor: f64,
) -> Result<()> {
    if estimates.len() != dist.len() {
        return Err(Error::InvalidDistribution(format!(
            "{} estimates for {} diseases",
            estimates.len(),
            dist.len()
        )));
    }
    let upper = (1.0 - floor).min(1.0 - f64::EPSILON);
    let next = dist
        .original()
        .iter()
        .zip(estimates)
        .map(|(&p0, &est)| ((p0 + g * est) / (g + 1.0)).clamp(floor, upper))
        .collect();
    dist.set_current(next)
}

/// Build P′₀ for a configuration.
pub fn initial_distribution(
    net: &Network,
    ev: &Evidence,
    config: &VariantConfig,
) -> Result<(ImportanceSet, SamplingDistribution)> {
    let his = if config.use_itb_init {
        itb_importance_set(net, ev, config.itb_rounds)
    } else {
        ImportanceSet::default()
    };
    let dist = initial_sampling_distribution(net, &his, config.floor)?;
    Ok((his, dist))
}

/// Run the simulation until the budget is spent.
pub fn run(net: &Network, ev: &Evidence, config: &VariantConfig) -> Result<RunOutput> {
    config.validate()?;
    let (importance_set, dist) = initial_distribution(net, ev, config)?;
    let mut sim = Simulation::new(net, ev, config, dist);
    let start = Instant::now();
    loop {
        let done = match config.budget {
            Budget::Trials(n) => sim.trials() >= n,
            Budget::WallTime(d) => start.elapsed() >= d,
        };
        if done {
            break;
        }
        sim.step(start.elapsed())?;
    }
    sim.finish(importance_set, start.elapsed())
}

/// Stepwise simulation state; [`run`] drives it to the budget.
pub struct Simulation<'a> {
    scorer: TrialScorer<'a>,
    config: VariantConfig,
    dist: SamplingDistribution,
    streams: TrialStreams,
    table: EstimateTable,
    hypothesis: Hypothesis,
    cache: crate::engine::score::LikelihoodCache,
    blanket: Vec<f64>,
    zero_counts: Vec<u64>,
    records: Vec<TrialRecord>,
    checkpoints: Vec<Checkpoint>,
    updates: Vec<u64>,
    skipped: Vec<u64>,
    t: u64,
}

impl<'a> Simulation<'a> {
    pub fn new(
        net: &'a Network,
        ev: &Evidence,
        config: &VariantConfig,
        dist: SamplingDistribution,
    ) -> Simulation<'a> {
        let scorer = TrialScorer::new(net, ev);
        let n = net.diseases();
        let cache = scorer.new_cache();
        let zero_counts = vec![0; scorer.observed()];
        Simulation {
            scorer,
            config: config.clone(),
            dist,
            streams: TrialStreams::new(config.seed),
            table: EstimateTable::new(n),
            hypothesis: Hypothesis::all_absent(n),
            cache,
            blanket: vec![0.0; n],
            zero_counts,
            records: Vec::new(),
            checkpoints: Vec::new(),
            updates: Vec::new(),
            skipped: Vec::new(),
            t: 0,
        }
    }

    pub fn trials(&self) -> u64 {
        self.t
    }

    pub fn table(&self) -> &EstimateTable {
        &self.table
    }

    pub fn distribution(&self) -> &SamplingDistribution {
        &self.dist
    }

    /// Run one trial. `elapsed` is the wall time since the run started.
    pub fn step(&mut self, elapsed: Duration) -> Result<TrialRecord> {
        self.t += 1;
        let t = self.t;
        let mut rng = self.streams.stream(t);
        self.dist.sample_into(&mut rng, &mut self.hypothesis);
        let score = self.scorer.score(&self.hypothesis, &self.dist, &mut self.cache);
        if score.log_score.is_zero() {
            for (k, c) in self.zero_counts.iter_mut().enumerate() {
                if self.cache.likelihood(&self.scorer, k) == 0.0 {
                    *c += 1;
                }
            }
            self.table.accumulate(&self.hypothesis, LogProb::Zero, None);
        } else if self.config.markov_blanket_scoring {
            self.scorer
                .markov_blanket(&self.hypothesis, &score, &self.cache, &mut self.blanket);
            self.table
                .accumulate(&self.hypothesis, score.log_score, Some(&self.blanket));
        } else {
            self.table.accumulate(&self.hypothesis, score.log_score, None);
        }
        let record = TrialRecord {
            trial: t,
            log_score: score.log_score,
            log_joint: score.log_joint,
            h_plus: self.hypothesis.cardinality() as u32,
            elapsed,
        };
        if self.config.record_trials {
            self.records.push(record);
        }
        if self.config.self_importance && self.config.schedule.is_update_point(t) {
            match self.table.estimates() {
                Some(est) => {
                    let g = self.config.schedule.g(t);
                    self_importance_update(&mut self.dist, &est, g, self.config.floor)?;
                    self.updates.push(t);
                }
                None => self.skipped.push(t),
            }
        }
        if t % self.config.checkpoint_every == 0 {
            self.checkpoint(elapsed);
        }
        Ok(record)
    }

    fn checkpoint(&mut self, elapsed: Duration) {
        self.checkpoints.push(Checkpoint {
            trial: self.t,
            elapsed,
            estimates: self.table.estimates(),
        });
    }

    pub fn finish(mut self, importance_set: ImportanceSet, elapsed: Duration) -> Result<RunOutput> {
        if self.checkpoints.last().map(|c| c.trial) != Some(self.t) {
            self.checkpoint(elapsed);
        }
        let Some(estimates) = self.table.estimates() else {
            let mut culprits: Vec<(usize, u64)> = self
                .zero_counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(k, &c)| (self.scorer.finding(k), c))
                .collect();
            culprits.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            culprits.truncate(10);
            return Err(Error::NoMassFound {
                trials: self.t,
                culprits,
            });
        };
        Ok(RunOutput {
            estimates,
            table: self.table,
            records: self.records,
            checkpoints: self.checkpoints,
            trials: self.t,
            elapsed,
            importance_set,
            distribution: self.dist,
            updates: self.updates,
            skipped_updates: self.skipped,
        })
    }
}
