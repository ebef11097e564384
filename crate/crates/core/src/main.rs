use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use noisy_or_lw::engine::{run, Budget, UpdateSchedule, Variant, VariantConfig};
use noisy_or_lw::exact::{enumerate, DEFAULT_CAP};
use noisy_or_lw::experiment::{run_experiment, ExperimentConfig};
use noisy_or_lw::generate::{generate_case, generate_network, CaseSpec, CaseTargets, GeneratorParams, LinkSource};
use noisy_or_lw::heuristics::{
    initial_sampling_distribution, itb_importance_set, tabular_bayes, DEFAULT_FLOOR, DEFAULT_ITB_ROUNDS,
};
use noisy_or_lw::io::{
    cardinality_csv, estimates_csv, fmt_f64, histogram_csv, parse_case, parse_estimates, parse_network,
    parse_trials, read_file, series_csv, throughput_csv, trials_csv, write_case, write_file, write_network,
    ThroughputRow, Timing,
};
use noisy_or_lw::metrics::{
    cardinality_profile, convergence_series, joint_log_histogram, outlier_threshold, topk_correlation,
    upper_tail_outliers, OutlierRule, RankedDistribution, DEFAULT_TOP_K,
};
use noisy_or_lw::network::{log_joint, Hypothesis, Network};

#[derive(Parser)]
#[command(name = "noisy-or-lw", version, about = "Likelihood-weighting inference for noisy-OR diagnosis networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic network (defaults to QMR scale).
    Generate(GenerateArgs),
    /// Draw a case by forward-sampling a random diagnosis.
    Gencase(GencaseArgs),
    /// Exact posteriors by enumeration (small networks only).
    Exact {
        network: PathBuf,
        case: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Single-disease posteriors.
    Tabular {
        network: PathBuf,
        case: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Heuristic importance set and the initial sampling distribution.
    Itb {
        network: PathBuf,
        case: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ITB_ROUNDS)]
        rounds: usize,
        #[arg(long, default_value_t = DEFAULT_FLOOR)]
        floor: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the simulator on one case.
    Simulate(SimulateArgs),
    /// Histogram, outliers and cardinality profile of a trials.csv.
    Metrics(MetricsArgs),
    /// Run a batch experiment from a TOML file.
    Experiment { config: PathBuf },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 534)]
    diseases: usize,
    #[arg(long, default_value_t = 4040)]
    findings: usize,
    /// Mean parents per finding [default: 40740/4040]
    #[arg(long)]
    mean_arcs: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    dispersion: f64,
    #[arg(long, default_value_t = 1e-4)]
    prior_min: f64,
    #[arg(long, default_value_t = 5e-2)]
    prior_max: f64,
    /// Relative weights of frequency codes 1..5, comma separated
    #[arg(long, value_delimiter = ',', num_args = 5, conflicts_with = "link_range")]
    freq_weights: Option<Vec<f64>>,
    /// Draw link probabilities uniformly from LO,HI instead of frequency codes
    #[arg(long, value_delimiter = ',', num_args = 2)]
    link_range: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GencaseArgs {
    network: PathBuf,
    #[arg(long, default_value_t = 5)]
    diagnosis: usize,
    #[arg(long, default_value_t = 51)]
    present: usize,
    #[arg(long, default_value_t = 2)]
    absent: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "case")]
    name: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    network: PathBuf,
    case: PathBuf,
    /// Preset to start from: S, S/NMBS, S/NITB, S/NSI or REF
    #[arg(long, default_value = "S")]
    variant: String,
    #[arg(long, conflicts_with = "minutes")]
    trials: Option<u64>,
    #[arg(long)]
    minutes: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    no_mbs: bool,
    #[arg(long)]
    no_si: bool,
    #[arg(long)]
    no_itb: bool,
    #[arg(long)]
    update_start: Option<u64>,
    #[arg(long)]
    update_every: Option<u64>,
    #[arg(long)]
    g_scale: Option<f64>,
    #[arg(long)]
    floor: Option<f64>,
    /// Diseases compared by r [default: min(20, n)]
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long, default_value_t = 5_000)]
    checkpoint_every: u64,
    /// estimates.csv to measure convergence against
    #[arg(long, conflicts_with = "exact_reference")]
    reference: Option<PathBuf>,
    /// Use exact enumeration as the reference
    #[arg(long)]
    exact_reference: bool,
    /// Output directory; estimates go to stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    trials: PathBuf,
    /// With --case, locates the null hypothesis in the histogram
    #[arg(long, requires = "case")]
    network: Option<PathBuf>,
    #[arg(long, requires = "network")]
    case: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    bin_width: f64,
    #[arg(long, default_value_t = 100)]
    window: usize,
    #[arg(long, default_value_t = 3.0)]
    mads: f64,
    /// Also report r(reference, estimates)
    #[arg(long, requires = "reference")]
    estimates: Option<PathBuf>,
    #[arg(long, requires = "estimates")]
    reference: Option<PathBuf>,
    /// Diseases compared by r [default: min(20, n)]
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_network(path: &Path) -> Result<Network> {
    parse_network(&read_file(path)?).with_context(|| format!("reading network {}", path.display()))
}

fn load_case(path: &Path, net: &Network) -> Result<CaseSpec> {
    parse_case(&read_file(path)?, net.findings()).with_context(|| format!("reading case {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(write_file(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let mut p = GeneratorParams::qmr_scale(a.seed);
    p.diseases = a.diseases;
    p.findings = a.findings;
    p.mean_arcs = a.mean_arcs.unwrap_or(p.mean_arcs.min(a.diseases as f64));
    p.dispersion = a.dispersion;
    p.prior_range = (a.prior_min, a.prior_max);
    if let Some(w) = a.freq_weights {
        p.links = LinkSource::Frequencies([w[0], w[1], w[2], w[3], w[4]]);
    }
    if let Some(r) = a.link_range {
        p.links = LinkSource::Uniform { lo: r[0], hi: r[1] };
    }
    p.name = a.name.unwrap_or_else(|| format!("synthetic-{}x{}-{}", a.diseases, a.findings, a.seed));
    let net = generate_network(&p)?;
    eprintln!("{} diseases, {} findings, {} arcs", net.diseases(), net.findings(), net.arc_count());
    emit(a.out.as_deref(), &write_network(&net))
}

fn gencase(a: GencaseArgs) -> Result<()> {
    let net = load_network(&a.network)?;
    let targets = CaseTargets {
        diagnosis: a.diagnosis,
        present: a.present,
        absent: a.absent,
    };
    let case = generate_case(&net, a.name, targets, a.seed)?;
    emit(a.out.as_deref(), &write_case(&case))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let net = load_network(&a.network)?;
    let case = load_case(&a.case, &net)?;
    let budget = match (a.trials, a.minutes) {
        (_, Some(m)) if m > 0.0 && m.is_finite() => Budget::WallTime(Duration::from_secs_f64(m * 60.0)),
        (_, Some(m)) => bail!("--minutes {m} must be positive"),
        (Some(t), None) => Budget::Trials(t),
        (None, None) => Budget::Trials(100_000),
    };
    let variant: Variant = a.variant.parse()?;
    let mut cfg = VariantConfig::for_variant(variant, budget, a.seed);
    cfg.markov_blanket_scoring &= !a.no_mbs;
    cfg.self_importance &= !a.no_si;
    cfg.use_itb_init &= !a.no_itb;
    let s = cfg.schedule;
    cfg.schedule = UpdateSchedule {
        start: a.update_start.unwrap_or(s.start),
        every: a.update_every.unwrap_or(s.every),
        g_scale: a.g_scale.unwrap_or(s.g_scale),
    };
    if let Some(f) = a.floor {
        cfg.floor = f;
    }
    cfg.checkpoint_every = a.checkpoint_every;
    cfg.record_trials = a.out.is_some();

    let reference = if a.exact_reference {
        Some(enumerate(&net, &case.evidence, DEFAULT_CAP)?.posteriors)
    } else {
        a.reference.as_deref().map(|p| Ok::<_, anyhow::Error>(parse_estimates(&read_file(p)?)?)).transpose()?
    };
    let top_k = a.top_k.unwrap_or(DEFAULT_TOP_K.min(net.diseases()));
    if let Some(r) = &reference {
        if r.len() != net.diseases() {
            bail!("reference has {} diseases, network has {}", r.len(), net.diseases());
        }
        if top_k < 2 || top_k > r.len() {
            bail!("--top-k {top_k} must be in 2..={}", r.len());
        }
    }
    let out = run(&net, &case.evidence, &cfg)?;
    eprintln!(
        "{} trials in {:.3} s ({:.0} trials/min), {} P' updates",
        out.trials,
        out.elapsed.as_secs_f64(),
        out.trials_per_minute(),
        out.updates.len()
    );
    let ranked = reference.map(RankedDistribution::new);
    if let Some(r) = &ranked {
        eprintln!("r = {}", topk_correlation(r, &out.estimates, top_k)?);
    }
    let Some(dir) = a.out else {
        print!("{}", estimates_csv(&out.estimates));
        return Ok(());
    };
    let timing = match budget {
        Budget::Trials(_) => Timing::Omitted,
        Budget::WallTime(_) => Timing::Recorded,
    };
    write_file(&dir.join("estimates.csv"), &estimates_csv(&out.estimates))?;
    write_file(&dir.join("trials.csv"), &trials_csv(&out.records, timing))?;
    if let Some(r) = &ranked {
        let series = convergence_series(&out.checkpoints, r, top_k)?;
        write_file(&dir.join("series.csv"), &series_csv(&series, timing))?;
    }
    let row = ThroughputRow {
        variant: variant.name().into(),
        trials: out.trials,
        minutes: out.elapsed.as_secs_f64() / 60.0,
    };
    write_file(&dir.join("throughput.csv"), &throughput_csv(&[row]))?;
    Ok(())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let records = parse_trials(&read_file(&a.trials)?).with_context(|| format!("reading {}", a.trials.display()))?;
    let null = match (&a.network, &a.case) {
        (Some(n), Some(c)) => {
            let net = load_network(n)?;
            let case = load_case(c, &net)?;
            log_joint(&net, &case.evidence, &Hypothesis::all_absent(net.diseases()))
        }
        _ => noisy_or_lw::LogProb::Zero,
    };
    let hist = joint_log_histogram(&records, a.bin_width, null)?;
    let rule = OutlierRule {
        window: a.window,
        mads: a.mads,
    };
    let threshold = outlier_threshold(&records, rule)?;
    let outliers = upper_tail_outliers(&records, rule)?;
    let profile = cardinality_profile(&records, a.bin_width)?;
    eprintln!(
        "{} trials, {} outliers above log10 joint {}",
        records.len(),
        outliers.len(),
        threshold.map_or("-".into(), fmt_f64)
    );
    if let (Some(e), Some(r)) = (&a.estimates, &a.reference) {
        let est = parse_estimates(&read_file(e)?)?;
        let reference = RankedDistribution::new(parse_estimates(&read_file(r)?)?);
        let k = a.top_k.unwrap_or(DEFAULT_TOP_K.min(reference.len()));
        println!("r = {}", topk_correlation(&reference, &est, k)?);
    }
    match a.out {
        Some(dir) => {
            write_file(&dir.join("histogram.csv"), &histogram_csv(&hist))?;
            write_file(&dir.join("outliers.csv"), &trials_csv(&outliers, Timing::Omitted))?;
            write_file(&dir.join("cardinality.csv"), &cardinality_csv(&profile, a.bin_width))?;
        }
        None => print!("{}", histogram_csv(&hist)),
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(a) => generate(a),
        Command::Gencase(a) => gencase(a),
        Command::Exact { network, case, cap, out } => {
            let net = load_network(&network)?;
            let case = load_case(&case, &net)?;
            let res = enumerate(&net, &case.evidence, cap)?;
            eprintln!("P(evidence) = {}", fmt_f64(res.evidence_prob()));
            emit(out.as_deref(), &estimates_csv(&res.posteriors))
        }
        Command::Tabular { network, case, out } => {
            let net = load_network(&network)?;
            let case = load_case(&case, &net)?;
            emit(out.as_deref(), &estimates_csv(&tabular_bayes(&net, &case.evidence)?))
        }
        Command::Itb { network, case, rounds, floor, out } => {
            let net = load_network(&network)?;
            let case = load_case(&case, &net)?;
            let set = itb_importance_set(&net, &case.evidence, rounds);
            let dist = initial_sampling_distribution(&net, &set, floor)?;
            let mut text = String::from("disease,member,prior,p0\n");
            for (i, p0) in dist.original().iter().enumerate() {
                text.push_str(&format!(
                    "{i},{},{},{}\n",
                    u8::from(set.contains(i)),
                    fmt_f64(net.prior(i)),
                    fmt_f64(*p0)
                ));
            }
            eprintln!("importance set: {:?}", set.members());
            emit(out.as_deref(), &text)
        }
        Command::Simulate(a) => simulate(a),
        Command::Metrics(a) => metrics(a),
        Command::Experiment { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_experiment(&cfg)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for j in &report.jobs {
                println!("{} {} seed {}: {} trials, r = {}", j.case, j.variant, j.seed, j.trials, j.r);
            }
            Ok(())
        }
    }
}
