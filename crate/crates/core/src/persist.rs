//! On-disk artifact formats: hash/score/calibration CSVs, preimage and trace
//! CSVs, the experiment report, and the run manifest.
//!
//! Floats are written through Rust's shortest round-trip formatting, so
//! re-reading a file recovers bit-identical values and identical inputs
//! produce byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::FeatureVector;
use crate::error::{Error, Result};
use crate::evaluation::{ConfigRow, ExperimentReport};
use crate::matcher::ThresholdCalibration;
use crate::optimizer::OptTrace;
use crate::transforms::HashVector;

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Format(format!("bad {what} value {s:?}")))
}

/// Write enrolled hash vectors, one CSV row of integers per subject.
pub fn write_hashes_csv(path: &Path, entries: &[(String, HashVector)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let l = entries.first().map(|(_, h)| h.len()).unwrap_or(0);
    let mut header = vec!["subject_id".to_string()];
    header.extend((0..l).map(|i| format!("c{i}")));
    w.write_record(&header)?;
    for (id, hash) in entries {
        let mut row = vec![id.clone()];
        row.extend(hash.codes().iter().map(|c| c.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Score dump for external ROC tooling: `label,score`.
pub fn write_scores_csv(path: &Path, genuine: &[f64], impostor: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label", "score"])?;
    for s in genuine {
        w.write_record(["genuine", &fmt_f64(*s)])?;
    }
    for s in impostor {
        w.write_record(["impostor", &fmt_f64(*s)])?;
    }
    w.flush()?;
    Ok(())
}

/// Attack-side calibration summary.
pub fn write_calibration_csv(path: &Path, cal: &ThresholdCalibration) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["theta", "theta_sq", "eer", "fmr", "fnmr"])?;
    w.write_record([
        fmt_f64(cal.theta),
        fmt_f64(cal.theta_squared),
        fmt_f64(cal.eer),
        fmt_f64(cal.fmr_at_theta),
        fmt_f64(cal.fnmr_at_theta),
    ])?;
    w.flush()?;
    Ok(())
}

/// One persisted preimage, keyed by subject, scheme, L, and optimizer seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PreimageRecord {
    pub subject_id: String,
    pub scheme: String,
    pub k: usize,
    pub l: usize,
    pub seed: u64,
    pub converged: bool,
    pub final_loss: f64,
    pub final_violation: f64,
    /// Outer iterations for the constrained attack; absent for the plain GA.
    pub outer_iterations: Option<usize>,
    /// Inner GA generations.
    pub inner_generations: usize,
    pub preimage: FeatureVector,
}

const PREIMAGE_FIXED_FIELDS: usize = 10;

pub fn write_preimages_csv(path: &Path, records: &[PreimageRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = records.first().map(|r| r.preimage.dim()).unwrap_or(0);
    let mut header: Vec<String> = [
        "subject_id",
        "scheme",
        "k",
        "l",
        "seed",
        "converged",
        "final_loss",
        "final_violation",
        "outer_iterations",
        "inner_generations",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((0..dim).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.subject_id.clone(),
            r.scheme.clone(),
            r.k.to_string(),
            r.l.to_string(),
            r.seed.to_string(),
            r.converged.to_string(),
            fmt_f64(r.final_loss),
            fmt_f64(r.final_violation),
            r.outer_iterations.map(|v| v.to_string()).unwrap_or_default(),
            r.inner_generations.to_string(),
        ];
        row.extend(r.preimage.values().iter().map(|v| fmt_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_preimages_csv(path: &Path) -> Result<Vec<PreimageRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if headers.len() < PREIMAGE_FIXED_FIELDS || &headers[0] != "subject_id" {
        return Err(Error::Format(format!(
            "{}: not a preimage CSV",
            path.display()
        )));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Format(e.to_string()))?;
        let mut values = Vec::with_capacity(row.len() - PREIMAGE_FIXED_FIELDS);
        for field in row.iter().skip(PREIMAGE_FIXED_FIELDS) {
            values.push(parse_f64(field, "preimage coordinate")?);
        }
        records.push(PreimageRecord {
            subject_id: row[0].to_string(),
            scheme: row[1].to_string(),
            k: row[2].parse().map_err(|_| Error::Format(format!("bad k {:?}", &row[2])))?,
            l: row[3].parse().map_err(|_| Error::Format(format!("bad l {:?}", &row[3])))?,
            seed: row[4].parse().map_err(|_| Error::Format(format!("bad seed {:?}", &row[4])))?,
            converged: row[5]
                .parse()
                .map_err(|_| Error::Format(format!("bad converged flag {:?}", &row[5])))?,
            final_loss: parse_f64(&row[6], "final_loss")?,
            final_violation: parse_f64(&row[7], "final_violation")?,
            outer_iterations: if row[8].is_empty() {
                None
            } else {
                Some(row[8].parse().map_err(|_| {
                    Error::Format(format!("bad outer_iterations {:?}", &row[8]))
                })?)
            },
            inner_generations: row[9]
                .parse()
                .map_err(|_| Error::Format(format!("bad inner_generations {:?}", &row[9])))?,
            preimage: FeatureVector::raw(values)?,
        });
    }
    Ok(records)
}

/// Per-target optimization trace: `generation,best_loss,best_violation,mean_loss`.
pub fn write_trace_csv(path: &Path, trace: &OptTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["generation", "best_loss", "best_violation", "mean_loss"])?;
    for row in &trace.rows {
        w.write_record([
            row.generation.to_string(),
            fmt_f64(row.best_loss),
            row.best_violation.map(fmt_f64).unwrap_or_default(),
            fmt_f64(row.mean_loss),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Wall-clock timings, kept apart from the deterministic artifacts.
pub fn write_timings_csv(path: &Path, timings: &[(String, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["subject_id", "time_s"])?;
    for (id, t) in timings {
        w.write_record([id.clone(), fmt_f64(*t)])?;
    }
    w.flush()?;
    Ok(())
}

pub const REPORT_HEADER: [&str; 14] = [
    "scheme", "K", "L", "theta_sq", "eer", "fmr", "attack", "sar", "fai", "tee", "tre", "var",
    "generations", "time_s",
];

/// Flatten a report into the table mirrored from the experiment protocol:
/// one line per (L, attack).
pub fn write_report_csv(path: &Path, report: &ExperimentReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(REPORT_HEADER)?;
    for row in &report.rows {
        for attack in &row.attacks {
            w.write_record([
                row.scheme.name().to_string(),
                row.k.to_string(),
                row.l.to_string(),
                fmt_f64(row.theta_squared),
                fmt_f64(row.eer),
                fmt_f64(row.fmr),
                attack.kind.name().to_string(),
                fmt_f64(attack.metrics.sar),
                fmt_f64(attack.metrics.fai),
                fmt_f64(attack.metrics.tee),
                fmt_f64(attack.metrics.tre),
                fmt_f64(attack.metrics.var),
                fmt_f64(attack.mean_generations),
                fmt_f64(attack.mean_time_s),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Row-level failures, written beside the report instead of inside it.
pub fn write_report_errors_csv(path: &Path, rows: &[&ConfigRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scheme", "K", "L", "error"])?;
    for row in rows {
        w.write_record([
            row.scheme.name().to_string(),
            row.k.to_string(),
            row.l.to_string(),
            row.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One parsed line of `report.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    pub scheme: String,
    pub k: usize,
    pub l: usize,
    pub theta_sq: f64,
    pub eer: f64,
    pub fmr: f64,
    pub attack: String,
    pub sar: f64,
    pub fai: f64,
    pub tee: f64,
    pub tre: f64,
    pub var: f64,
    pub generations: f64,
    pub time_s: f64,
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportLine>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut lines = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Format(e.to_string()))?;
        if row.len() != REPORT_HEADER.len() {
            return Err(Error::Format(format!(
                "{}: report row has {} fields",
                path.display(),
                row.len()
            )));
        }
        lines.push(ReportLine {
            scheme: row[0].to_string(),
            k: row[1].parse().map_err(|_| Error::Format("bad K".into()))?,
            l: row[2].parse().map_err(|_| Error::Format("bad L".into()))?,
            theta_sq: parse_f64(&row[3], "theta_sq")?,
            eer: parse_f64(&row[4], "eer")?,
            fmr: parse_f64(&row[5], "fmr")?,
            attack: row[6].to_string(),
            sar: parse_f64(&row[7], "sar")?,
            fai: parse_f64(&row[8], "fai")?,
            tee: parse_f64(&row[9], "tee")?,
            tre: parse_f64(&row[10], "tre")?,
            var: parse_f64(&row[11], "var")?,
            generations: parse_f64(&row[12], "generations")?,
            time_s: parse_f64(&row[13], "time_s")?,
        });
    }
    Ok(lines)
}

/// Error-trend feed: `scheme,L,attack,tre,tee,var`, one line per (L, attack).
pub fn write_trend_csv(path: &Path, report: &ExperimentReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scheme", "L", "attack", "tre", "tee", "var"])?;
    for row in &report.rows {
        for attack in &row.attacks {
            w.write_record([
                row.scheme.name().to_string(),
                row.l.to_string(),
                attack.kind.name().to_string(),
                fmt_f64(attack.metrics.tre),
                fmt_f64(attack.metrics.tee),
                fmt_f64(attack.metrics.var),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Everything needed to reproduce and audit a run's outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub master_seed: u64,
    pub n_reps: usize,
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub dataset_sha256: String,
    pub attack_token_seeds: BTreeMap<String, u64>,
    pub verify_token_seeds: BTreeMap<String, u64>,
    /// Relative path -> content digest for every file the run produced.
    pub outputs: BTreeMap<String, String>,
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Format(format!("manifest serialization: {e}")))?;
    fs::write(path, json + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::TraceRow;
    use crate::transforms::Alphabet;

    #[test]
    fn preimage_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("preimages.csv");
        let records = vec![
            PreimageRecord {
                subject_id: "s0001".into(),
                scheme: "iom".into(),
                k: 16,
                l: 32,
                seed: 0xDEADBEEF,
                converged: true,
                final_loss: 0.0,
                final_violation: -1.25e-9,
                outer_iterations: Some(5),
                inner_generations: 321,
                preimage: FeatureVector::raw(vec![0.1, -2.5e-17, 3.0]).unwrap(),
            },
            PreimageRecord {
                subject_id: "s0002".into(),
                scheme: "iom".into(),
                k: 16,
                l: 32,
                seed: 7,
                converged: false,
                final_loss: 0.125,
                final_violation: 0.5,
                outer_iterations: None,
                inner_generations: 88,
                preimage: FeatureVector::raw(vec![1.0 / 3.0, f64::MIN_POSITIVE, -0.0]).unwrap(),
            },
        ];
        write_preimages_csv(&path, &records).unwrap();
        let loaded = read_preimages_csv(&path).unwrap();
        assert_eq!(records, loaded);
    }

    #[test]
    fn trace_csv_has_expected_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let trace = OptTrace {
            rows: vec![
                TraceRow {
                    generation: 0,
                    best_loss: 0.5,
                    best_violation: Some(1.25),
                    mean_loss: 0.75,
                },
                TraceRow {
                    generation: 1,
                    best_loss: 0.25,
                    best_violation: None,
                    mean_loss: 0.5,
                },
            ],
            outer_iterations: Some(2),
            inner_generations: 40,
            wall_time_s: 0.01,
        };
        write_trace_csv(&path, &trace).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "generation,best_loss,best_violation,mean_loss"
        );
        assert_eq!(lines.next().unwrap(), "0,0.5,1.25,0.75");
        assert_eq!(lines.next().unwrap(), "1,0.25,,0.5");
    }

    #[test]
    fn hashes_csv_lists_codes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hashes.csv");
        let entries = vec![
            (
                "a".to_string(),
                HashVector::new(vec![3, 1], Alphabet::Index(4)).unwrap(),
            ),
            (
                "b".to_string(),
                HashVector::new(vec![2, 4], Alphabet::Index(4)).unwrap(),
            ),
        ];
        write_hashes_csv(&path, &entries).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "subject_id,c0,c1\na,3,1\nb,2,4\n");
    }

    #[test]
    fn digests_are_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
