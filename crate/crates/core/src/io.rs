//! Text formats for networks and cases, and the CSV outputs.
//!
//! Network file:
//!
//! ```text
//! NETWORK <name>
//! DISEASES <n>
//! FINDINGS <m>
//! PRIOR <i> <p>
//! LINK <i> <j> freq:<1-5> | p:<q>
//! ```
//!
//! Case file: `CASE <name>`, `PRESENT <j>...`, `ABSENT <j>...` and an
//! optional `DIAGNOSIS <i>...`. `#` starts a comment in both.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use crate::engine::TrialRecord;
use crate::error::{Error, Result};
use crate::generate::CaseSpec;
use crate::metrics::{Correlation, JointHistogram, RankedDistribution, SeriesPoint};
use crate::network::{freq_to_prob, prob_to_freq, Evidence, LogProb, Network};

/// Shortest text that parses back to the same f64, in plain notation for
/// ordinary magnitudes and scientific otherwise.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Write `contents`, creating parent directories as needed.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Non-empty lines with comments stripped, numbered from 1.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(k, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((k + 1, l))
    })
}

fn parse_num<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(line, format!("bad {what} {tok:?}")))
}

fn expect_end<'a>(line: usize, mut toks: impl Iterator<Item = &'a str>) -> Result<()> {
    match toks.next() {
        Some(t) => Err(parse_err(line, format!("unexpected trailing token {t:?}"))),
        None => Ok(()),
    }
}

pub fn write_network(net: &Network) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "NETWORK {}", net.name());
    let _ = writeln!(s, "DISEASES {}", net.diseases());
    let _ = writeln!(s, "FINDINGS {}", net.findings());
    for (i, p) in net.priors().iter().enumerate() {
        let _ = writeln!(s, "PRIOR {i} {}", fmt_f64(*p));
    }
    for (i, j, q) in net.arcs() {
        match prob_to_freq(q) {
            Some(k) => {
                let _ = writeln!(s, "LINK {i} {j} freq:{k}");
            }
            None => {
                let _ = writeln!(s, "LINK {i} {j} p:{}", fmt_f64(q));
            }
        }
    }
    s
}

pub fn parse_network(text: &str) -> Result<Network> {
    let mut name: Option<String> = None;
    let mut n: Option<usize> = None;
    let mut m: Option<usize> = None;
    let mut priors: Vec<Option<f64>> = Vec::new();
    let mut arcs: Vec<(usize, usize, f64)> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut last = 0;
    for (line, l) in content_lines(text) {
        last = line;
        let mut toks = l.split_whitespace();
        let key = toks.next().unwrap_or_default();
        match key {
            "NETWORK" => {
                if name.is_some() {
                    return Err(parse_err(line, "NETWORK given twice"));
                }
                let rest = l["NETWORK".len()..].trim();
                if rest.is_empty() {
                    return Err(parse_err(line, "missing network name"));
                }
                name = Some(rest.to_string());
            }
            "DISEASES" | "FINDINGS" => {
                let v: usize = parse_num(line, toks.next(), "count")?;
                expect_end(line, toks)?;
                let slot = if key == "DISEASES" { &mut n } else { &mut m };
                if slot.is_some() {
                    return Err(parse_err(line, format!("{key} given twice")));
                }
                *slot = Some(v);
                if key == "DISEASES" {
                    priors = vec![None; v];
                }
            }
            "PRIOR" => {
                let n = n.ok_or_else(|| parse_err(line, "PRIOR before DISEASES"))?;
                let i: usize = parse_num(line, toks.next(), "disease index")?;
                let p: f64 = parse_num(line, toks.next(), "prior")?;
                expect_end(line, toks)?;
                if i >= n {
                    return Err(parse_err(line, format!("disease {i} out of range (n = {n})")));
                }
                if priors[i].replace(p).is_some() {
                    return Err(parse_err(line, format!("duplicate prior for disease {i}")));
                }
            }
            "LINK" => {
                let (Some(n), Some(m)) = (n, m) else {
                    return Err(parse_err(line, "LINK before DISEASES and FINDINGS"));
                };
                let i: usize = parse_num(line, toks.next(), "disease index")?;
                let j: usize = parse_num(line, toks.next(), "finding index")?;
                let spec = toks
                    .next()
                    .ok_or_else(|| parse_err(line, "missing link strength"))?;
                expect_end(line, toks)?;
                if i >= n {
                    return Err(parse_err(line, format!("disease {i} out of range (n = {n})")));
                }
                if j >= m {
                    return Err(parse_err(line, format!("finding {j} out of range (m = {m})")));
                }
                let q = if let Some(k) = spec.strip_prefix("freq:") {
                    let k: i64 = parse_num(line, Some(k), "frequency code")?;
                    freq_to_prob(k).map_err(|e| parse_err(line, e.to_string()))?
                } else if let Some(p) = spec.strip_prefix("p:") {
                    parse_num(line, Some(p), "link probability")?
                } else {
                    return Err(parse_err(
                        line,
                        format!("link strength {spec:?} is neither freq:<k> nor p:<q>"),
                    ));
                };
                if !seen.insert((i, j)) {
                    return Err(parse_err(line, format!("duplicate arc {i} -> {j}")));
                }
                arcs.push((i, j, q));
            }
            other => return Err(parse_err(line, format!("unknown directive {other:?}"))),
        }
    }
    let name = name.ok_or_else(|| parse_err(last, "missing NETWORK"))?;
    let m = m.ok_or_else(|| parse_err(last, "missing FINDINGS"))?;
    n.ok_or_else(|| parse_err(last, "missing DISEASES"))?;
    let priors = priors
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.ok_or_else(|| parse_err(last, format!("no prior for disease {i}"))))
        .collect::<Result<Vec<f64>>>()?;
    Network::new(name, priors, m, arcs)
}

pub fn write_case(case: &CaseSpec) -> String {
    let join = |v: &[usize]| {
        v.iter()
            .map(|x| format!(" {x}"))
            .collect::<String>()
    };
    let mut s = String::new();
    let _ = writeln!(s, "CASE {}", case.name);
    let _ = writeln!(s, "PRESENT{}", join(case.evidence.present()));
    let _ = writeln!(s, "ABSENT{}", join(case.evidence.absent()));
    if let Some(d) = &case.diagnosis {
        let _ = writeln!(s, "DIAGNOSIS{}", join(d));
    }
    s
}

/// Parse a case against a network with `findings` findings.
pub fn parse_case(text: &str, findings: usize) -> Result<CaseSpec> {
    let mut name = None;
    let mut present = Vec::new();
    let mut absent = Vec::new();
    let mut diagnosis: Option<Vec<usize>> = None;
    let mut last = 0;
    for (line, l) in content_lines(text) {
        last = line;
        let mut toks = l.split_whitespace();
        let key = toks.next().unwrap_or_default();
        let mut indices = || -> Result<Vec<usize>> {
            toks.by_ref()
                .map(|t| parse_num(line, Some(t), "index"))
                .collect()
        };
        match key {
            "CASE" => {
                let rest = l["CASE".len()..].trim();
                if rest.is_empty() {
                    return Err(parse_err(line, "missing case name"));
                }
                if name.replace(rest.to_string()).is_some() {
                    return Err(parse_err(line, "CASE given twice"));
                }
            }
            "PRESENT" => present.extend(indices()?),
            "ABSENT" => absent.extend(indices()?),
            "DIAGNOSIS" => diagnosis.get_or_insert_with(Vec::new).extend(indices()?),
            other => return Err(parse_err(line, format!("unknown directive {other:?}"))),
        }
    }
    let name = name.ok_or_else(|| parse_err(last, "missing CASE"))?;
    let evidence = Evidence::new(findings, present, absent).map_err(|e| parse_err(last, e.to_string()))?;
    if let Some(d) = diagnosis.as_mut() {
        d.sort_unstable();
        d.dedup();
    }
    Ok(CaseSpec {
        name,
        evidence,
        diagnosis,
    })
}

/// Whether per-trial timing goes into the CSVs. Omitted timing keeps files
/// from trial-budgeted runs byte-identical across repeats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    Recorded,
    Omitted,
}

fn ms(d: Duration, timing: Timing) -> String {
    match timing {
        Timing::Recorded => format!("{:.3}", d.as_secs_f64() * 1e3),
        Timing::Omitted => String::new(),
    }
}

fn log10_field(lp: LogProb) -> String {
    match lp.log10() {
        Some(v) => fmt_f64(v),
        None => "-inf".into(),
    }
}

fn r_field(r: Correlation) -> String {
    match r {
        Correlation::Defined(v) => fmt_f64(v),
        Correlation::Undefined => "NaN".into(),
    }
}

fn to_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // writing into a Vec cannot fail
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv output is utf-8")
}

fn csv_rows(text: &str, header: &[&str]) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let got = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(parse_err(
            1,
            format!("expected header {:?}, got {:?}", header.join(","), got.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    rdr.records()
        .enumerate()
        .map(|(k, r)| {
            r.map(|r| (k + 2, r))
                .map_err(|e| parse_err(k + 2, e.to_string()))
        })
        .collect()
}

/// `disease,rank,estimate`, most probable first.
pub fn estimates_csv(estimates: &[f64]) -> String {
    let ranked = RankedDistribution::new(estimates.to_vec());
    to_csv(
        &["disease", "rank", "estimate"],
        ranked
            .order()
            .iter()
            .enumerate()
            .map(|(k, &i)| vec![i.to_string(), (k + 1).to_string(), fmt_f64(estimates[i])]),
    )
}

/// Per-disease estimates back from `estimates_csv` output.
pub fn parse_estimates(text: &str) -> Result<Vec<f64>> {
    let rows = csv_rows(text, &["disease", "rank", "estimate"])?;
    let mut out: Vec<Option<f64>> = vec![None; rows.len()];
    for (line, r) in &rows {
        let i: usize = parse_num(*line, r.get(0), "disease index")?;
        let v: f64 = parse_num(*line, r.get(2), "estimate")?;
        if i >= out.len() {
            return Err(parse_err(*line, format!("disease {i} out of range for {} rows", out.len())));
        }
        if out[i].replace(v).is_some() {
            return Err(parse_err(*line, format!("disease {i} listed twice")));
        }
    }
    Ok(out.into_iter().map(|v| v.unwrap_or(0.0)).collect())
}

/// `trial,elapsed_ms,r`
pub fn series_csv(points: &[SeriesPoint], timing: Timing) -> String {
    to_csv(
        &["trial", "elapsed_ms", "r"],
        points
            .iter()
            .map(|p| vec![p.trial.to_string(), ms(p.elapsed, timing), r_field(p.r)]),
    )
}

/// `trial,log10_joint,log10_score,h_plus,elapsed_ms`
pub fn trials_csv(records: &[TrialRecord], timing: Timing) -> String {
    to_csv(
        &["trial", "log10_joint", "log10_score", "h_plus", "elapsed_ms"],
        records.iter().map(|r| {
            vec![
                r.trial.to_string(),
                log10_field(r.log_joint),
                log10_field(r.log_score),
                r.h_plus.to_string(),
                ms(r.elapsed, timing),
            ]
        }),
    )
}

fn parse_log10(line: usize, tok: Option<&str>, what: &str) -> Result<LogProb> {
    let v: f64 = parse_num(line, tok, what)?;
    if v == f64::NEG_INFINITY {
        Ok(LogProb::Zero)
    } else if v.is_finite() {
        Ok(LogProb::Ln(v * std::f64::consts::LN_10))
    } else {
        Err(parse_err(line, format!("bad {what} {v}")))
    }
}

pub fn parse_trials(text: &str) -> Result<Vec<TrialRecord>> {
    csv_rows(text, &["trial", "log10_joint", "log10_score", "h_plus", "elapsed_ms"])?
        .into_iter()
        .map(|(line, r)| {
            let elapsed = match r.get(4) {
                Some("") | None => Duration::ZERO,
                t => {
                    let v: f64 = parse_num(line, t, "elapsed_ms")?;
                    Duration::from_secs_f64(v.max(0.0) / 1e3)
                }
            };
            Ok(TrialRecord {
                trial: parse_num(line, r.get(0), "trial")?,
                log_joint: parse_log10(line, r.get(1), "log10_joint")?,
                log_score: parse_log10(line, r.get(2), "log10_score")?,
                h_plus: parse_num(line, r.get(3), "h_plus")?,
                elapsed,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputRow {
    pub variant: String,
    pub trials: u64,
    pub minutes: f64,
}

/// `variant,trials,minutes,trials_per_minute`
pub fn throughput_csv(rows: &[ThroughputRow]) -> String {
    to_csv(
        &["variant", "trials", "minutes", "trials_per_minute"],
        rows.iter().map(|r| {
            let tpm = if r.minutes > 0.0 {
                fmt_f64(r.trials as f64 / r.minutes)
            } else {
                String::new()
            };
            vec![r.variant.clone(), r.trials.to_string(), fmt_f64(r.minutes), tpm]
        }),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub case: String,
    pub variant: String,
    pub seed: u64,
    pub trials: u64,
    pub r: Correlation,
}

/// `case,variant,seed,trials,r`
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    to_csv(
        &["case", "variant", "seed", "trials", "r"],
        rows.iter().map(|r| {
            vec![
                r.case.clone(),
                r.variant.clone(),
                r.seed.to_string(),
                r.trials.to_string(),
                r_field(r.r),
            ]
        }),
    )
}

/// `bin_lo,bin_hi,count,null`: one row per occupied bin, the bin holding
/// the null hypothesis's joint marked 1, and a final `-inf` row for
/// zero-joint trials when there are any.
pub fn histogram_csv(h: &JointHistogram) -> String {
    let null_bin = h.null_log10_joint.map(|v| h.bin_of(v));
    let mut rows: Vec<Vec<String>> = h
        .bins
        .iter()
        .map(|(&b, &c)| {
            vec![
                fmt_f64(b as f64 * h.bin_width),
                fmt_f64((b + 1) as f64 * h.bin_width),
                c.to_string(),
                u8::from(null_bin == Some(b)).to_string(),
            ]
        })
        .collect();
    if h.zero > 0 {
        rows.push(vec!["-inf".into(), "-inf".into(), h.zero.to_string(), "0".into()]);
    }
    to_csv(&["bin_lo", "bin_hi", "count", "null"], rows)
}

/// `bin_lo,bin_hi,mean_h_plus`
pub fn cardinality_csv(profile: &BTreeMap<i64, f64>, bin_width: f64) -> String {
    to_csv(
        &["bin_lo", "bin_hi", "mean_h_plus"],
        profile.iter().map(|(&b, &v)| {
            vec![
                fmt_f64(b as f64 * bin_width),
                fmt_f64((b + 1) as f64 * bin_width),
                fmt_f64(v),
            ]
        }),
    )
}
