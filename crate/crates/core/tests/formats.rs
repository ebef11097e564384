use noisy_or_lw::generate::{generate_case, generate_network, CaseTargets, GeneratorParams, LinkSource};
use noisy_or_lw::io::{parse_case, parse_network, write_case, write_network};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = GeneratorParams> {
    (1usize..15, 1usize..30, any::<u64>(), prop::bool::ANY, 0.0f64..1.0).prop_map(|(n, m, seed, freq, disp)| {
        GeneratorParams {
            name: format!("net {seed}"),
            diseases: n,
            findings: m,
            mean_arcs: 1.0 + (n as f64 - 1.0) * 0.3,
            dispersion: disp,
            prior_range: (1e-6, 0.3),
            links: if freq {
                LinkSource::Frequencies([1.0, 2.0, 0.0, 1.0, 1.0])
            } else {
                LinkSource::Uniform { lo: 1e-9, hi: 1.0 }
            },
            seed,
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn network_round_trip(p in params()) {
        let net = generate_network(&p).unwrap();
        prop_assert!((0..net.findings()).all(|j| !net.parents(j).is_empty()));
        prop_assert_eq!(parse_network(&write_network(&net)).unwrap(), net);
    }

    #[test]
    fn case_round_trip(p in params(), seed in any::<u64>()) {
        let net = generate_network(&p).unwrap();
        let t = CaseTargets { diagnosis: 1, present: 1, absent: 0 };
        if let Ok(case) = generate_case(&net, "c", t, seed) {
            prop_assert_eq!(parse_case(&write_case(&case), net.findings()).unwrap(), case);
        }
    }
}

#[test]
fn frequency_link_is_table_value() {
    let net = parse_network("NETWORK x\nDISEASES 1\nFINDINGS 1\nPRIOR 0 0.5\nLINK 0 0 freq:3\n").unwrap();
    assert_eq!(net.link(0, 0), Some(0.50));
}

#[test]
fn out_of_range_prior_is_rejected() {
    assert!(parse_network("NETWORK x\nDISEASES 1\nFINDINGS 1\nPRIOR 0 1.5\nLINK 0 0 freq:3\n").is_err());
}
