//! Outputs pinned to files under tests/golden. Set GOLDEN_UPDATE=1 to rewrite
//! them after an intended change.

use std::fmt::Write;
use std::path::PathBuf;

use noisy_or_lw::engine::{run, Budget, Variant, VariantConfig};
use noisy_or_lw::generate::{generate_case, generate_network, CaseTargets, GeneratorParams};
use noisy_or_lw::heuristics::{initial_sampling_distribution, itb_importance_set, DEFAULT_FLOOR, DEFAULT_ITB_ROUNDS};
use noisy_or_lw::io::{fmt_f64, histogram_csv};
use noisy_or_lw::metrics::joint_log_histogram;
use noisy_or_lw::network::{log_joint, Hypothesis};

fn check(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("GOLDEN_UPDATE").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} changed");
}

#[test]
fn itb_on_small_case() {
    let net = generate_network(&GeneratorParams::small(6, 10, 21)).unwrap();
    let t = CaseTargets {
        diagnosis: 2,
        present: 4,
        absent: 2,
    };
    let case = generate_case(&net, "g", t, 5).unwrap();
    let set = itb_importance_set(&net, &case.evidence, DEFAULT_ITB_ROUNDS);
    let dist = initial_sampling_distribution(&net, &set, DEFAULT_FLOOR).unwrap();
    let mut out = String::new();
    writeln!(out, "present {:?}", case.evidence.present()).unwrap();
    writeln!(out, "absent {:?}", case.evidence.absent()).unwrap();
    writeln!(out, "members {:?}", set.members()).unwrap();
    for p in dist.original() {
        writeln!(out, "{}", fmt_f64(*p)).unwrap();
    }
    check("itb_n6_m10.txt", &out);
}

#[test]
fn histogram_of_seeded_run() {
    let net = generate_network(&GeneratorParams::small(10, 20, 8)).unwrap();
    let t = CaseTargets {
        diagnosis: 2,
        present: 5,
        absent: 3,
    };
    let case = generate_case(&net, "h", t, 3).unwrap();
    let cfg = VariantConfig::for_variant(Variant::S, Budget::Trials(30_000), 11);
    let out = run(&net, &case.evidence, &cfg).unwrap();
    let null = log_joint(&net, &case.evidence, &Hypothesis::all_absent(net.diseases()));
    let hist = joint_log_histogram(&out.records, 0.5, null).unwrap();
    check("histogram_small.csv", &histogram_csv(&hist));
}
