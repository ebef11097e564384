//! Batch experiments described by a TOML file.
//!
//! ```toml
//! network = "net.txt"
//! cases = ["cpc1.txt", "cpc2.txt"]
//! variants = ["S", "S/NMBS", "S/NITB", "S/NSI"]
//! seeds = [1, 2, 3]
//! trials = 100000          # or: minutes = 2.0
//! out = "results"
//!
//! [reference]
//! kind = "exact"           # or "files" with [reference.files] case = "path", or "none"
//! ```
//!
//! Relative paths are resolved against the directory holding the config.
//! Each run writes `<out>/<case>/<variant>/seed-<seed>/` with estimates.csv,
//! series.csv and trials.csv; each case gets a throughput.csv and the whole
//! experiment a summary.csv.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use crate::engine::{run, Budget, Variant, VariantConfig};
use crate::error::{Error, Result};
use crate::exact::{enumerate, DEFAULT_CAP};
use crate::generate::CaseSpec;
use crate::io::{
    estimates_csv, parse_case, parse_estimates, parse_network, read_file, series_csv,
    summary_csv, throughput_csv, trials_csv, write_file, SummaryRow, ThroughputRow, Timing,
};
use crate::metrics::{convergence_series, topk_correlation, Correlation, RankedDistribution, DEFAULT_TOP_K};
use crate::network::Network;

fn default_variants() -> Vec<String> {
    [Variant::S, Variant::NoMarkovBlanket, Variant::NoItb, Variant::NoSelfImportance]
        .iter()
        .map(|v| v.name().to_string())
        .collect()
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_checkpoint() -> u64 {
    5_000
}

fn default_true() -> bool {
    true
}

fn default_cap() -> usize {
    DEFAULT_CAP
}

/// Where the reference posteriors for r come from.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReferenceSource {
    /// Exact enumeration; only for networks within the cap.
    Exact {
        #[serde(default = "default_cap")]
        cap: usize,
    },
    /// estimates.csv files from earlier REF runs, keyed by case name.
    Files { files: BTreeMap<String, PathBuf> },
    /// No reference; allowed only when every variant is REF.
    None,
}

impl Default for ReferenceSource {
    fn default() -> Self {
        ReferenceSource::Exact { cap: DEFAULT_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: PathBuf,
    pub cases: Vec<PathBuf>,
    #[serde(default = "default_variants")]
    pub variants: Vec<String>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub trials: Option<u64>,
    pub minutes: Option<f64>,
    #[serde(default)]
    pub reference: ReferenceSource,
    /// Diseases compared by r; defaults to min(20, n).
    pub top_k: Option<usize>,
    #[serde(default = "default_checkpoint")]
    pub checkpoint_every: u64,
    #[serde(default = "default_true")]
    pub write_trials: bool,
    pub floor: Option<f64>,
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Read a config file and resolve its relative paths.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::parse(&read_file(path)?)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.network);
        self.cases.iter_mut().for_each(fix);
        fix(&mut self.out);
        if let ReferenceSource::Files { files } = &mut self.reference {
            files.values_mut().for_each(fix);
        }
    }

    pub fn budget(&self) -> Result<Budget> {
        match (self.trials, self.minutes) {
            (Some(t), None) => Ok(Budget::Trials(t)),
            (None, Some(m)) if m > 0.0 && m.is_finite() => {
                Ok(Budget::WallTime(Duration::from_secs_f64(m * 60.0)))
            }
            (None, Some(m)) => Err(Error::InvalidConfig(format!("minutes {m} must be positive"))),
            _ => Err(Error::InvalidConfig(
                "give exactly one of `trials` or `minutes`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobResult {
    pub case: String,
    pub variant: Variant,
    pub seed: u64,
    pub trials: u64,
    pub elapsed: Duration,
    pub r: Correlation,
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub jobs: Vec<JobResult>,
    pub warnings: Vec<String>,
}

/// Directory of one run.
pub fn job_dir(out: &Path, case: &str, variant: Variant, seed: u64) -> PathBuf {
    out.join(case).join(variant.slug()).join(format!("seed-{seed}"))
}

fn reference_for(
    cfg: &ExperimentConfig,
    net: &Network,
    case: &CaseSpec,
    variants: &[Variant],
) -> Result<Option<Vec<f64>>> {
    let hint = "run the REF variant for this case first and list its estimates.csv under \
                [reference] kind = \"files\"";
    match &cfg.reference {
        ReferenceSource::Exact { cap } => match enumerate(net, &case.evidence, *cap) {
            Err(Error::TooManyDiseases { n, cap }) => Err(Error::InvalidConfig(format!(
                "case {}: no exact reference for {n} diseases (cap {cap}); {hint}",
                case.name
            ))),
            other => other.map(|r| Some(r.posteriors)),
        },
        ReferenceSource::Files { files } => {
            let path = files.get(&case.name).ok_or_else(|| {
                Error::InvalidConfig(format!("case {}: no reference file; {hint}", case.name))
            })?;
            let est = parse_estimates(&read_file(path)?)?;
            if est.len() != net.diseases() {
                return Err(Error::InvalidConfig(format!(
                    "{}: {} diseases in reference, network has {}",
                    path.display(),
                    est.len(),
                    net.diseases()
                )));
            }
            Ok(Some(est))
        }
        ReferenceSource::None => {
            if variants.iter().all(|&v| v == Variant::Reference) {
                Ok(None)
            } else {
                Err(Error::InvalidConfig(format!(
                    "case {}: a reference is needed to score non-REF variants; {hint}",
                    case.name
                )))
            }
        }
    }
}

/// Run every (case, variant, seed) job in order and write the outputs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = ExperimentReport::default();
    let budget = cfg.budget()?;
    let variants = cfg
        .variants
        .iter()
        .map(|v| v.parse::<Variant>())
        .collect::<Result<Vec<_>>>()?;
    if variants.is_empty() || cfg.seeds.is_empty() || cfg.cases.is_empty() {
        report
            .warnings
            .push("nothing to run: the variant, seed or case list is empty".into());
        return Ok(report);
    }
    let net = parse_network(&read_file(&cfg.network)?)?;
    let top_k = cfg.top_k.unwrap_or(DEFAULT_TOP_K.min(net.diseases()));
    if top_k < 2 || top_k > net.diseases() {
        return Err(Error::TopK {
            k: top_k,
            n: net.diseases(),
        });
    }
    let timing = match budget {
        Budget::Trials(_) => Timing::Omitted,
        Budget::WallTime(_) => Timing::Recorded,
    };
    let mut summary = Vec::new();
    for case_path in &cfg.cases {
        let case = parse_case(&read_file(case_path)?, net.findings())?;
        let reference = reference_for(cfg, &net, &case, &variants)?;
        let ranked = reference.map(RankedDistribution::new);
        if let Some(r) = &ranked {
            write_file(&cfg.out.join(&case.name).join("reference.csv"), &estimates_csv(r.probs()))?;
        }
        let mut throughput: BTreeMap<Variant, (u64, f64)> = BTreeMap::new();
        for &variant in &variants {
            for &seed in &cfg.seeds {
                let mut vc = VariantConfig::for_variant(variant, budget, seed);
                vc.checkpoint_every = cfg.checkpoint_every;
                vc.record_trials = cfg.write_trials;
                if let Some(f) = cfg.floor {
                    vc.floor = f;
                }
                let out = match run(&net, &case.evidence, &vc) {
                    Ok(o) => o,
                    Err(e @ Error::NoMassFound { .. }) => {
                        report
                            .warnings
                            .push(format!("case {} {variant} seed {seed}: {e}", case.name));
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let dir = job_dir(&cfg.out, &case.name, variant, seed);
                write_file(&dir.join("estimates.csv"), &estimates_csv(&out.estimates))?;
                let r = match &ranked {
                    Some(reference) => {
                        let series = convergence_series(&out.checkpoints, reference, top_k)?;
                        write_file(&dir.join("series.csv"), &series_csv(&series, timing))?;
                        topk_correlation(reference, &out.estimates, top_k)?
                    }
                    None => Correlation::Undefined,
                };
                if cfg.write_trials {
                    write_file(&dir.join("trials.csv"), &trials_csv(&out.records, timing))?;
                }
                let e = throughput.entry(variant).or_insert((0, 0.0));
                e.0 += out.trials;
                e.1 += out.elapsed.as_secs_f64() / 60.0;
                summary.push(SummaryRow {
                    case: case.name.clone(),
                    variant: variant.name().into(),
                    seed,
                    trials: out.trials,
                    r,
                });
                report.jobs.push(JobResult {
                    case: case.name.clone(),
                    variant,
                    seed,
                    trials: out.trials,
                    elapsed: out.elapsed,
                    r,
                    dir,
                });
            }
        }
        let rows: Vec<ThroughputRow> = throughput
            .into_iter()
            .map(|(v, (trials, minutes))| ThroughputRow {
                variant: v.name().into(),
                trials,
                minutes,
            })
            .collect();
        write_file(&cfg.out.join(&case.name).join("throughput.csv"), &throughput_csv(&rows))?;
    }
    write_file(&cfg.out.join("summary.csv"), &summary_csv(&summary))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults() {
        let cfg = ExperimentConfig::parse(
            "network = \"n.txt\"\ncases = [\"c.txt\"]\ntrials = 10\nout = \"o\"\n",
        )
        .unwrap();
        assert_eq!(cfg.variants, vec!["S", "S/NMBS", "S/NITB", "S/NSI"]);
        assert_eq!(cfg.seeds, vec![1]);
        assert_eq!(cfg.reference, ReferenceSource::Exact { cap: DEFAULT_CAP });
        assert_eq!(cfg.budget().unwrap(), Budget::Trials(10));
    }

    #[test]
    fn config_reference_files() {
        let mut cfg = ExperimentConfig::parse(
            "network = \"n.txt\"\ncases = []\nminutes = 0.5\nout = \"o\"\n\
             [reference]\nkind = \"files\"\nfiles = { cpc1 = \"ref/cpc1.csv\" }\n",
        )
        .unwrap();
        cfg.resolve_paths(Path::new("/base"));
        assert_eq!(cfg.budget().unwrap(), Budget::WallTime(Duration::from_secs(30)));
        assert_eq!(cfg.network, PathBuf::from("/base/n.txt"));
        match &cfg.reference {
            ReferenceSource::Files { files } => {
                assert_eq!(files["cpc1"], PathBuf::from("/base/ref/cpc1.csv"))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_errors() {
        assert!(ExperimentConfig::parse("network = 1").is_err());
        assert!(ExperimentConfig::parse(
            "network = \"n\"\ncases = []\nout = \"o\"\nbogus = 1\n"
        )
        .is_err());
        let both = ExperimentConfig::parse(
            "network = \"n\"\ncases = []\nout = \"o\"\ntrials = 1\nminutes = 1.0\n",
        )
        .unwrap();
        assert!(both.budget().is_err());
    }

    #[test]
    fn empty_variant_list_is_a_no_op() {
        let cfg = ExperimentConfig::parse(
            "network = \"/nonexistent\"\ncases = [\"c\"]\nvariants = []\ntrials = 5\nout = \"/nonexistent/out\"\n",
        )
        .unwrap();
        let report = run_experiment(&cfg).unwrap();
        assert!(report.jobs.is_empty());
        assert_eq!(report.warnings.len(), 1);
    }
}
