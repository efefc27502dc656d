//! Feature ingestion, synthetic data generation, and the enroll/verify split.
//!
//! Real embeddings arrive as CSV (`subject_id,sample_idx,f0,...`) or as the
//! compact `CBF1` binary format; both are L2-normalized on ingestion so that
//! file-based and synthetic data are interchangeable downstream.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magic bytes opening the binary feature-set format.
pub const BINARY_MAGIC: &[u8; 4] = b"CBF1";

/// Tolerance on the unit-norm invariant of ingested vectors.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// A real-valued biometric embedding.
///
/// Vectors produced by this module are unit-norm; preimages recovered by the
/// attacks are carried in the same type without renormalization.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    /// Wrap raw coordinates, requiring only that every entry is finite.
    pub fn raw(values: Vec<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite coordinate {bad}")));
        }
        Ok(Self { values })
    }

    /// Wrap and L2-normalize. Fails on non-finite entries or zero norm.
    ///
    /// Idempotent: a vector already unit-norm within [`NORM_TOLERANCE`] is
    /// kept bit-exactly, so save/load round trips do not drift.
    pub fn unit(values: Vec<f64>) -> Result<Self> {
        let mut v = Self::raw(values)?;
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::Format("zero-norm vector cannot be normalized".into()));
        }
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            for x in &mut v.values {
                *x /= norm;
            }
        }
        Ok(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cosine similarity; for unit vectors this is the plain dot product.
    pub fn dot(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// One subject and its ordered samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub samples: Vec<FeatureVector>,
}

/// A set of subjects sharing a common feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub subjects: Vec<Subject>,
    pub dimension: usize,
}

impl FeatureSet {
    pub fn total_samples(&self) -> usize {
        self.subjects.iter().map(|s| s.samples.len()).sum()
    }
}

/// Per-subject enroll/verify partition: the first sample enrolls, the rest verify.
#[derive(Debug, Clone)]
pub struct ProtocolSplit {
    pub subjects: Vec<SplitSubject>,
    pub dimension: usize,
}

/// One subject's slice of a [`ProtocolSplit`].
#[derive(Debug, Clone)]
pub struct SplitSubject {
    pub id: String,
    pub enroll: FeatureVector,
    pub verify: Vec<FeatureVector>,
}

impl ProtocolSplit {
    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_verify(&self) -> usize {
        self.subjects.iter().map(|s| s.verify.len()).sum()
    }
}

/// Recipe for a deterministic synthetic feature set.
///
/// Each subject gets an i.i.d. standard Gaussian class mean; each sample is
/// the mean plus `N(0, within_class_noise^2)` per coordinate, L2-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_subjects: usize,
    pub samples_per_subject: usize,
    pub dimension: usize,
    pub within_class_noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.n_subjects < 2 {
            return Err(Error::Config(format!(
                "n_subjects must be >= 2, got {}",
                self.n_subjects
            )));
        }
        if self.samples_per_subject < 2 {
            return Err(Error::Config(format!(
                "samples_per_subject must be >= 2, got {}",
                self.samples_per_subject
            )));
        }
        if self.dimension == 0 {
            return Err(Error::Config("dimension must be >= 1".into()));
        }
        if !(self.within_class_noise >= 0.0) {
            return Err(Error::Config(format!(
                "within_class_noise must be >= 0, got {}",
                self.within_class_noise
            )));
        }
        Ok(())
    }
}

/// Generate a synthetic [`FeatureSet`]; a pure function of its spec.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<FeatureSet> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut subjects = Vec::with_capacity(spec.n_subjects);
    for i in 0..spec.n_subjects {
        let mean: Vec<f64> = (0..spec.dimension)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut samples = Vec::with_capacity(spec.samples_per_subject);
        for _ in 0..spec.samples_per_subject {
            let values: Vec<f64> = mean
                .iter()
                .map(|m| m + spec.within_class_noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            samples.push(FeatureVector::unit(values).map_err(|e| {
                Error::Config(format!("degenerate synthetic sample for subject {i}: {e}"))
            })?);
        }
        subjects.push(Subject {
            id: format!("s{i:04}"),
            samples,
        });
    }
    Ok(FeatureSet {
        subjects,
        dimension: spec.dimension,
    })
}

/// On-disk encodings accepted by [`load_features`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Csv,
    Binary,
}

/// Load a feature set, L2-normalizing every vector.
pub fn load_features(path: &Path, format: FileFormat) -> Result<FeatureSet> {
    match format {
        FileFormat::Csv => load_csv(path),
        FileFormat::Binary => load_binary(path),
    }
}

fn ingest(record: String, reason: impl Into<String>) -> Error {
    Error::Ingest {
        record,
        reason: reason.into(),
    }
}

fn load_csv(path: &Path) -> Result<FeatureSet> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.len() < 3 || &headers[0] != "subject_id" || &headers[1] != "sample_idx" {
        return Err(Error::Format(format!(
            "{}: expected header subject_id,sample_idx,f0,... got {:?}",
            path.display(),
            headers
        )));
    }
    let dimension = headers.len() - 2;

    // (subject, sample_idx, vector) in file order; subjects keep first-appearance order.
    let mut subjects: Vec<Subject> = Vec::new();
    let mut order: Vec<(usize, Vec<(usize, FeatureVector)>)> = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let record_name = format!("{} row {}", path.display(), line + 2);
        if row.len() != headers.len() {
            return Err(ingest(
                record_name,
                format!("expected {} fields, got {}", headers.len(), row.len()),
            ));
        }
        let subject_id = row[0].to_string();
        let sample_idx: usize = row[1]
            .parse()
            .map_err(|_| ingest(record_name.clone(), format!("bad sample_idx {:?}", &row[1])))?;
        let mut values = Vec::with_capacity(dimension);
        for field in row.iter().skip(2) {
            let v: f64 = field
                .parse()
                .map_err(|_| ingest(record_name.clone(), format!("bad coordinate {field:?}")))?;
            if !v.is_finite() {
                return Err(ingest(record_name, format!("non-finite coordinate {v}")));
            }
            values.push(v);
        }
        let vector = FeatureVector::unit(values)
            .map_err(|e| ingest(record_name.clone(), e.to_string()))?;
        let slot = match subjects.iter().position(|s| s.id == subject_id) {
            Some(i) => i,
            None => {
                subjects.push(Subject {
                    id: subject_id,
                    samples: Vec::new(),
                });
                order.push((subjects.len() - 1, Vec::new()));
                subjects.len() - 1
            }
        };
        if order[slot].1.iter().any(|(idx, _)| *idx == sample_idx) {
            return Err(ingest(
                record_name,
                format!("duplicate sample_idx {sample_idx} for subject {}", subjects[slot].id),
            ));
        }
        order[slot].1.push((sample_idx, vector));
    }
    for (slot, mut samples) in order {
        samples.sort_by_key(|(idx, _)| *idx);
        subjects[slot].samples = samples.into_iter().map(|(_, v)| v).collect();
    }
    if subjects.is_empty() {
        return Err(Error::EmptyInput("feature CSV contains no rows"));
    }
    Ok(FeatureSet {
        subjects,
        dimension,
    })
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("csv error: {other:?}")),
    }
}

fn load_binary(path: &Path) -> Result<FeatureSet> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {magic:?}, expected {BINARY_MAGIC:?}",
            path.display()
        )));
    }
    let dimension = r.read_u32::<LittleEndian>()? as usize;
    if dimension == 0 {
        return Err(Error::Format("binary feature set declares dimension 0".into()));
    }
    let n_subjects = r.read_u32::<LittleEndian>()? as usize;
    let mut subjects = Vec::with_capacity(n_subjects);
    for s in 0..n_subjects {
        let id_len = r.read_u32::<LittleEndian>()? as usize;
        let mut id_bytes = vec![0u8; id_len];
        r.read_exact(&mut id_bytes)?;
        let id = String::from_utf8(id_bytes)
            .map_err(|_| ingest(format!("subject #{s}"), "id is not valid UTF-8"))?;
        let n_samples = r.read_u32::<LittleEndian>()? as usize;
        let mut samples = Vec::with_capacity(n_samples);
        for i in 0..n_samples {
            let mut values = Vec::with_capacity(dimension);
            for _ in 0..dimension {
                values.push(r.read_f64::<LittleEndian>()?);
            }
            let record = format!("subject {id} sample {i}");
            if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
                return Err(ingest(record, format!("non-finite coordinate {bad}")));
            }
            samples.push(FeatureVector::unit(values).map_err(|e| ingest(record, e.to_string()))?);
        }
        subjects.push(Subject { id, samples });
    }
    Ok(FeatureSet {
        subjects,
        dimension,
    })
}

/// Write a feature set in the `CBF1` binary format.
pub fn save_features_binary(set: &FeatureSet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&canonical_bytes(set))?;
    w.flush()?;
    Ok(())
}

/// The exact byte string [`save_features_binary`] produces; also used as the
/// canonical form for dataset digests.
pub fn canonical_bytes(set: &FeatureSet) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(BINARY_MAGIC);
    out.write_u32::<LittleEndian>(set.dimension as u32).unwrap();
    out.write_u32::<LittleEndian>(set.subjects.len() as u32).unwrap();
    for subject in &set.subjects {
        out.write_u32::<LittleEndian>(subject.id.len() as u32).unwrap();
        out.extend_from_slice(subject.id.as_bytes());
        out.write_u32::<LittleEndian>(subject.samples.len() as u32)
            .unwrap();
        for sample in &subject.samples {
            for v in sample.values() {
                out.write_f64::<LittleEndian>(*v).unwrap();
            }
        }
    }
    out
}

/// Partition a feature set: sample 0 of each subject enrolls, the rest verify.
pub fn split_protocol(set: &FeatureSet) -> Result<ProtocolSplit> {
    let mut subjects = Vec::with_capacity(set.subjects.len());
    for subject in &set.subjects {
        if subject.samples.len() < 2 {
            return Err(Error::Protocol(format!(
                "subject {} has {} sample(s); need at least 2 (1 enroll + 1 verify)",
                subject.id,
                subject.samples.len()
            )));
        }
        if subject.samples.iter().any(|s| s.dim() != set.dimension) {
            return Err(Error::DimensionMismatch {
                expected: set.dimension,
                actual: subject
                    .samples
                    .iter()
                    .map(FeatureVector::dim)
                    .find(|d| *d != set.dimension)
                    .unwrap(),
            });
        }
        subjects.push(SplitSubject {
            id: subject.id.clone(),
            enroll: subject.samples[0].clone(),
            verify: subject.samples[1..].to_vec(),
        });
    }
    Ok(ProtocolSplit {
        subjects,
        dimension: set.dimension,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn csv_rows_normalize_three_four_five() {
        let f = write_temp("subject_id,sample_idx,f0,f1\ns1,0,3.0,4.0\ns1,1,0.0,1.0\n");
        let set = load_features(f.path(), FileFormat::Csv).unwrap();
        assert_eq!(set.subjects.len(), 1);
        assert_eq!(set.dimension, 2);
        let s = &set.subjects[0];
        assert_eq!(s.samples[0].values(), &[0.6, 0.8]);
        assert_eq!(s.samples[1].values(), &[0.0, 1.0]);
    }

    #[test]
    fn csv_dimension_mismatch_names_record() {
        let f = write_temp("subject_id,sample_idx,f0,f1\ns1,0,3.0,4.0\ns1,1,1.0,2.0,3.0\n");
        let err = load_features(f.path(), FileFormat::Csv).unwrap_err();
        // The csv crate flags unequal row lengths before our field count check.
        let msg = err.to_string();
        assert!(msg.contains("3") || msg.contains("row"), "unhelpful error: {msg}");
    }

    #[test]
    fn csv_rejects_non_finite_and_zero_norm() {
        let f = write_temp("subject_id,sample_idx,f0,f1\ns1,0,NaN,1.0\n");
        assert!(load_features(f.path(), FileFormat::Csv).is_err());
        let f = write_temp("subject_id,sample_idx,f0,f1\ns1,0,0.0,0.0\n");
        let err = load_features(f.path(), FileFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("zero-norm"));
    }

    #[test]
    fn csv_sample_idx_orders_within_subject() {
        let f = write_temp(
            "subject_id,sample_idx,f0,f1\ns1,1,0.0,1.0\ns2,0,1.0,0.0\ns1,0,1.0,0.0\ns2,1,0.0,1.0\n",
        );
        let set = load_features(f.path(), FileFormat::Csv).unwrap();
        assert_eq!(set.subjects[0].id, "s1");
        assert_eq!(set.subjects[1].id, "s2");
        assert_eq!(set.subjects[0].samples[0].values(), &[1.0, 0.0]);
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let spec = SyntheticSpec {
            n_subjects: 5,
            samples_per_subject: 3,
            dimension: 16,
            within_class_noise: 0.2,
            seed: 99,
        };
        let set = generate_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.cbf");
        save_features_binary(&set, &path).unwrap();
        let loaded = load_features(&path, FileFormat::Binary).unwrap();
        assert_eq!(set, loaded);
    }

    #[test]
    fn binary_rejects_bad_magic() {
        let f = write_temp("XXXXgarbage");
        let err = load_features(f.path(), FileFormat::Binary).unwrap_err();
        assert!(err.to_string().contains("magic"));
    }

    #[test]
    fn synthetic_zero_noise_repeats_samples() {
        let spec = SyntheticSpec {
            n_subjects: 2,
            samples_per_subject: 3,
            dimension: 8,
            within_class_noise: 0.0,
            seed: 7,
        };
        let set = generate_synthetic(&spec).unwrap();
        for subject in &set.subjects {
            for s in &subject.samples[1..] {
                assert_eq!(s, &subject.samples[0]);
            }
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec {
            n_subjects: 4,
            samples_per_subject: 2,
            dimension: 6,
            within_class_noise: 0.3,
            seed: 1234,
        };
        assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
    }

    #[test]
    fn synthetic_has_class_structure() {
        let spec = SyntheticSpec {
            n_subjects: 20,
            samples_per_subject: 4,
            dimension: 64,
            within_class_noise: 0.1,
            seed: 5,
        };
        let set = generate_synthetic(&spec).unwrap();
        let mut intra = (0.0, 0usize);
        let mut inter = (0.0, 0usize);
        for (i, a) in set.subjects.iter().enumerate() {
            for (j, b) in set.subjects.iter().enumerate() {
                for (si, x) in a.samples.iter().enumerate() {
                    for (sj, y) in b.samples.iter().enumerate() {
                        if i == j && si >= sj {
                            continue;
                        }
                        let c = x.dot(y);
                        if i == j {
                            intra = (intra.0 + c, intra.1 + 1);
                        } else {
                            inter = (inter.0 + c, inter.1 + 1);
                        }
                    }
                }
            }
        }
        let mean_intra = intra.0 / intra.1 as f64;
        let mean_inter = inter.0 / inter.1 as f64;
        assert!(
            mean_intra > mean_inter,
            "intra {mean_intra} should exceed inter {mean_inter}"
        );
    }

    #[test]
    fn synthetic_rejects_bad_specs() {
        let base = SyntheticSpec {
            n_subjects: 2,
            samples_per_subject: 2,
            dimension: 4,
            within_class_noise: 0.1,
            seed: 0,
        };
        for bad in [
            SyntheticSpec { n_subjects: 1, ..base.clone() },
            SyntheticSpec { samples_per_subject: 1, ..base.clone() },
            SyntheticSpec { within_class_noise: -0.5, ..base.clone() },
            SyntheticSpec { dimension: 0, ..base.clone() },
        ] {
            assert!(generate_synthetic(&bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn vectors_are_unit_norm() {
        let spec = SyntheticSpec {
            n_subjects: 6,
            samples_per_subject: 3,
            dimension: 32,
            within_class_noise: 0.4,
            seed: 11,
        };
        let set = generate_synthetic(&spec).unwrap();
        for subject in &set.subjects {
            for s in &subject.samples {
                assert!((s.norm() - 1.0).abs() < NORM_TOLERANCE);
            }
        }
    }

    #[test]
    fn split_takes_first_sample_as_enroll() {
        let spec = SyntheticSpec {
            n_subjects: 3,
            samples_per_subject: 3,
            dimension: 4,
            within_class_noise: 0.2,
            seed: 3,
        };
        let set = generate_synthetic(&spec).unwrap();
        let split = split_protocol(&set).unwrap();
        for (subject, split_subject) in set.subjects.iter().zip(&split.subjects) {
            assert_eq!(split_subject.enroll, subject.samples[0]);
            assert_eq!(split_subject.verify.as_slice(), &subject.samples[1..]);
        }
        assert_eq!(split.n_subjects() + split.n_verify(), set.total_samples());
    }

    #[test]
    fn split_protocol_matches_paper_counts() {
        let spec = SyntheticSpec {
            n_subjects: 158,
            samples_per_subject: 10,
            dimension: 8,
            within_class_noise: 0.1,
            seed: 17,
        };
        let set = generate_synthetic(&spec).unwrap();
        assert_eq!(set.total_samples(), 1580);
        let split = split_protocol(&set).unwrap();
        assert_eq!(split.n_subjects(), 158);
        assert_eq!(split.n_verify(), 1422);
    }

    #[test]
    fn split_rejects_single_sample_subject() {
        let set = FeatureSet {
            subjects: vec![Subject {
                id: "only".into(),
                samples: vec![FeatureVector::unit(vec![1.0, 0.0]).unwrap()],
            }],
            dimension: 2,
        };
        let err = split_protocol(&set).unwrap_err();
        assert!(err.to_string().contains("only"));
    }
}
