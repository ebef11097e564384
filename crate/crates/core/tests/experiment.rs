use std::fs;
use std::path::Path;

use noisy_or_lw::engine::Variant;
use noisy_or_lw::experiment::{job_dir, run_experiment, ExperimentConfig};
use noisy_or_lw::generate::{generate_case, generate_network, CaseTargets, GeneratorParams};
use noisy_or_lw::io::{write_case, write_network};
use noisy_or_lw::Error;

fn setup(dir: &Path, diseases: usize) {
    let net = generate_network(&GeneratorParams::small(diseases, 24, 2)).unwrap();
    fs::write(dir.join("net.txt"), write_network(&net)).unwrap();
    let t = CaseTargets {
        diagnosis: 2,
        present: 4,
        absent: 3,
    };
    for (name, seed) in [("alpha", 1), ("beta", 2)] {
        let case = generate_case(&net, name, t, seed).unwrap();
        fs::write(dir.join(format!("{name}.txt")), write_case(&case)).unwrap();
    }
}

const CONFIG: &str = r#"
network = "net.txt"
cases = ["alpha.txt", "beta.txt"]
variants = ["S", "S/NMBS", "S/NITB", "S/NSI", "REF"]
seeds = [1, 2]
trials = 15000
out = "results"
"#;

fn load(dir: &Path, text: &str) -> ExperimentConfig {
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    ExperimentConfig::load(&path).unwrap()
}

#[test]
fn trial_budget_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), 10);
    let cfg = load(dir.path(), CONFIG);
    let first = run_experiment(&cfg).unwrap();
    // a job that finds no mass is reported as a warning and skipped
    assert_eq!(first.jobs.len() + first.warnings.len(), 2 * 5 * 2);
    assert!(first.jobs.len() >= 18, "{:?}", first.warnings);
    let out = dir.path().join("results");
    let snapshot = |v: Variant, seed| {
        let d = job_dir(&out, "alpha", v, seed);
        ["estimates.csv", "series.csv", "trials.csv"].map(|f| fs::read(d.join(f)).unwrap())
    };
    let before = snapshot(Variant::NoItb, 2);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    run_experiment(&cfg).unwrap();
    assert_eq!(before, snapshot(Variant::NoItb, 2));
    assert_eq!(summary, fs::read_to_string(out.join("summary.csv")).unwrap());

    assert!(summary.starts_with("case,variant,seed,trials,r\n"));
    assert_eq!(summary.lines().count(), first.jobs.len() + 1);
    let tp = fs::read_to_string(out.join("alpha/throughput.csv")).unwrap();
    assert!(tp.starts_with("variant,trials,minutes,trials_per_minute\n"));
    assert_eq!(tp.lines().count(), 6);
    assert!(out.join("beta/reference.csv").exists());
    for j in &first.jobs {
        let r = j.r.value().unwrap();
        assert!(r > 0.9, "{} {} seed {}: r = {r}", j.case, j.variant, j.seed);
    }
}

#[test]
fn large_network_needs_a_reference_file() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), 24);
    let cfg = load(dir.path(), CONFIG);
    match run_experiment(&cfg) {
        Err(Error::InvalidConfig(msg)) => assert!(msg.contains("REF"), "{msg}"),
        other => panic!("expected refusal, got {other:?}"),
    }

    let files = format!("{CONFIG}\n[reference]\nkind = \"files\"\nfiles = {{ alpha = \"ref.csv\" }}\n");
    match run_experiment(&load(dir.path(), &files)) {
        Err(Error::Io { .. }) => {}
        other => panic!("expected missing file, got {other:?}"),
    }
}

#[test]
fn reference_runs_then_reuse() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), 24);
    let ref_only = CONFIG
        .replace(r#"variants = ["S", "S/NMBS", "S/NITB", "S/NSI", "REF"]"#, r#"variants = ["REF"]"#)
        .replace("seeds = [1, 2]", "seeds = [7]")
        .replace("\"results\"", "\"refs\"")
        + "\n[reference]\nkind = \"none\"\n";
    let report = run_experiment(&load(dir.path(), &ref_only)).unwrap();
    assert_eq!(report.jobs.len(), 2);

    let reuse = CONFIG.replace(r#", "REF"]"#, "]").replace("seeds = [1, 2]", "seeds = [1]")
        + "\n[reference]\nkind = \"files\"\n[reference.files]\n\
           alpha = \"refs/alpha/REF/seed-7/estimates.csv\"\n\
           beta = \"refs/beta/REF/seed-7/estimates.csv\"\n";
    let report = run_experiment(&load(dir.path(), &reuse)).unwrap();
    assert_eq!(report.jobs.len(), 2 * 4);
    assert!(report.jobs.iter().all(|j| j.r.value().is_some()));
}
