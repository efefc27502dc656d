//! Attack measurement: SAR/FAI plus the TEE/TRE/VAR error decomposition, and
//! whole-experiment orchestration across hash code sizes.
//!
//! Verification always happens under fresh tokens: every repetition derives
//! new parameters, recalibrates the threshold on that repetition's
//! genuine/impostor scores, and only then meets the preimage. Per-repetition
//! quantities are aggregated through order-insensitive sorted sums so the
//! repetition order never leaks into a report.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::attacks::{run_attack, AttackKind, AttackOutcome};
use crate::dataset::{FeatureSet, FeatureVector, ProtocolSplit};
use crate::error::{Error, Result};
use crate::matcher::{
    calibrate_threshold, hamming_distance, hash_split, score_hashes, SplitHashes,
    ThresholdCalibration,
};
use crate::optimizer::{AlgaConfig, GaConfig};
use crate::seeds;
use crate::transforms::{BiohashParams, HashVector, IomParams, SchemeParams};

/// Which cancelable transform an experiment exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Iom,
    Biohash,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Iom => "iom",
            Scheme::Biohash => "biohash",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "iom" => Ok(Scheme::Iom),
            "biohash" => Ok(Scheme::Biohash),
            other => Err(Error::Config(format!("unknown scheme {other:?}"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_true() -> bool {
    true
}

/// Scheme plus the non-token parameters needed to derive transform material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    /// IoM subspace dimension; unused by BioHash.
    pub k: usize,
    #[serde(default)]
    pub biohash_tau: f64,
    #[serde(default = "default_true")]
    pub biohash_orthonormalize: bool,
}

impl SchemeConfig {
    pub fn iom(k: usize) -> Self {
        Self {
            scheme: Scheme::Iom,
            k,
            biohash_tau: 0.0,
            biohash_orthonormalize: true,
        }
    }

    pub fn biohash(tau: f64) -> Self {
        Self {
            scheme: Scheme::Biohash,
            k: 2,
            biohash_tau: tau,
            biohash_orthonormalize: true,
        }
    }

    /// Derive the transform parameters for one token seed.
    pub fn derive_params(&self, n: usize, l: usize, token_seed: u64) -> Result<SchemeParams> {
        match self.scheme {
            Scheme::Iom => Ok(SchemeParams::Iom(IomParams::derive(token_seed, n, self.k, l)?)),
            Scheme::Biohash => Ok(SchemeParams::Biohash(BiohashParams::derive(
                token_seed,
                n,
                l,
                self.biohash_tau,
                self.biohash_orthonormalize,
            )?)),
        }
    }
}

/// Squared normalized Hamming distance between the compromised template and
/// the preimage's transform under the attack-side token.
pub fn compute_tre(h: &HashVector, h_hat: &HashVector) -> Result<f64> {
    let d = hamming_distance(h, h_hat)?;
    Ok(d * d)
}

/// Mean squared distance over the fresh-token verification repetitions.
pub fn compute_tee(test_distances: &[f64]) -> Result<f64> {
    if test_distances.is_empty() {
        return Err(Error::EmptyInput("test distance list is empty"));
    }
    Ok(sorted_mean(test_distances.iter().map(|d| d * d)))
}

/// Mean squared deviation of the fresh-token distances from the training
/// distance; the overfitting measure.
pub fn compute_var(test_distances: &[f64], train_distance: f64) -> Result<f64> {
    if test_distances.is_empty() {
        return Err(Error::EmptyInput("test distance list is empty"));
    }
    Ok(sorted_mean(
        test_distances
            .iter()
            .map(|d| (d - train_distance) * (d - train_distance)),
    ))
}

/// Mean computed over a sorted copy; invariant under permutation of inputs.
fn sorted_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v.iter().sum::<f64>() / v.len() as f64
}

/// Attack quality under fresh verification tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackMetrics {
    /// Fraction of (preimage, verify-sample-template) comparisons accepted.
    pub sar: f64,
    /// SAR minus the mean false match rate of the same repetitions.
    pub fai: f64,
    pub tee: f64,
    pub tre: f64,
    pub var: f64,
    pub n_repetitions: usize,
}

/// One verification repetition: fresh parameters, their hashes of the split,
/// and the threshold calibrated on that repetition's scores.
pub struct RepetitionEnv {
    pub params: SchemeParams,
    pub hashes: SplitHashes,
    pub calibration: ThresholdCalibration,
}

/// All verification repetitions for one (scheme, L) configuration.
pub struct VerificationEnv {
    pub l: usize,
    pub reps: Vec<RepetitionEnv>,
}

impl VerificationEnv {
    pub fn n_reps(&self) -> usize {
        self.reps.len()
    }

    pub fn mean_theta_squared(&self) -> f64 {
        sorted_mean(self.reps.iter().map(|r| r.calibration.theta_squared))
    }

    pub fn mean_eer(&self) -> f64 {
        sorted_mean(self.reps.iter().map(|r| r.calibration.eer))
    }

    pub fn mean_fmr(&self) -> f64 {
        sorted_mean(self.reps.iter().map(|r| r.calibration.fmr_at_theta))
    }
}

/// Derive `n_reps` fresh verification-side environments.
pub fn build_verification_env(
    split: &ProtocolSplit,
    scheme_cfg: &SchemeConfig,
    l: usize,
    n_reps: usize,
    master_seed: u64,
) -> Result<VerificationEnv> {
    if n_reps < 1 {
        return Err(Error::Config("n_reps must be >= 1".into()));
    }
    let mut reps = Vec::with_capacity(n_reps);
    for rep in 0..n_reps {
        let token = seeds::verify_token_seed(master_seed, scheme_cfg.scheme.name(), l, rep);
        let params = scheme_cfg.derive_params(split.dimension, l, token)?;
        let hashes = hash_split(split, &params)?;
        let (genuine, impostor) = score_hashes(&hashes)?;
        let calibration = calibrate_threshold(&genuine, &impostor)?;
        reps.push(RepetitionEnv {
            params,
            hashes,
            calibration,
        });
    }
    Ok(VerificationEnv { l, reps })
}

/// Evaluate per-subject preimages against a verification environment.
///
/// `preimages` holds `(subject_id, preimage, train_loss)` where `train_loss`
/// is the attack-side distance `D(h, h_hat)` of the outcome.
pub fn evaluate_with_env(
    split: &ProtocolSplit,
    env: &VerificationEnv,
    preimages: &[(String, FeatureVector, f64)],
) -> Result<AttackMetrics> {
    let mut missing = Vec::new();
    let mut ordered = Vec::with_capacity(split.subjects.len());
    for subject in &split.subjects {
        match preimages.iter().find(|(id, _, _)| *id == subject.id) {
            Some(entry) => ordered.push(entry),
            None => missing.push(subject.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Protocol(format!(
            "missing attack outcomes for subjects: {}",
            missing.join(", ")
        )));
    }

    let n_subjects = split.subjects.len();
    let n_reps = env.n_reps();
    // test_distances[j][rep] = D(h'_j, h_hat'_j) under repetition rep.
    let mut test_distances = vec![vec![0.0; n_reps]; n_subjects];
    let mut accepts = 0usize;
    let mut comparisons = 0usize;

    for (rep_idx, rep) in env.reps.iter().enumerate() {
        for (j, (_, preimage, _)) in ordered.iter().enumerate() {
            let preimage_hash = rep.params.hash(preimage)?;
            test_distances[j][rep_idx] =
                hamming_distance(&rep.hashes.enroll[j], &preimage_hash)?;
            for verify_hash in &rep.hashes.verify[j] {
                let d = hamming_distance(&preimage_hash, verify_hash)?;
                comparisons += 1;
                if d <= rep.calibration.theta {
                    accepts += 1;
                }
            }
        }
    }

    let sar = accepts as f64 / comparisons as f64;
    let fmr = env.mean_fmr();
    let tee = sorted_mean(
        (0..n_subjects).map(|j| compute_tee(&test_distances[j]).expect("n_reps >= 1")),
    );
    let tre = sorted_mean(ordered.iter().map(|(_, _, train_loss)| train_loss * train_loss));
    let var = sorted_mean((0..n_subjects).map(|j| {
        compute_var(&test_distances[j], ordered[j].2).expect("n_reps >= 1")
    }));

    Ok(AttackMetrics {
        sar,
        fai: sar - fmr,
        tee,
        tre,
        var,
        n_repetitions: n_reps,
    })
}

/// Build the verification environment and evaluate outcomes in one call.
pub fn evaluate_attack(
    split: &ProtocolSplit,
    outcomes: &[(String, AttackOutcome)],
    scheme_cfg: &SchemeConfig,
    l: usize,
    n_reps: usize,
    master_seed: u64,
) -> Result<AttackMetrics> {
    let env = build_verification_env(split, scheme_cfg, l, n_reps, master_seed)?;
    let preimages: Vec<(String, FeatureVector, f64)> = outcomes
        .iter()
        .map(|(id, o)| (id.clone(), o.preimage.clone(), o.final_loss))
        .collect();
    evaluate_with_env(split, &env, &preimages)
}

/// Everything `run_experiment` needs beyond the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scheme_cfg: SchemeConfig,
    pub l_list: Vec<usize>,
    pub attacks: Vec<AttackKind>,
    pub ga: GaConfig,
    pub alga: AlgaConfig,
    pub n_reps: usize,
    pub master_seed: u64,
}

/// Metrics of one attack within a report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRowMetrics {
    pub kind: AttackKind,
    pub metrics: AttackMetrics,
    pub converged_fraction: f64,
    pub mean_generations: f64,
    pub mean_time_s: f64,
}

/// One (scheme, L) configuration of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigRow {
    pub scheme: Scheme,
    pub k: usize,
    pub l: usize,
    pub theta_squared: f64,
    pub eer: f64,
    pub fmr: f64,
    pub attacks: Vec<AttackRowMetrics>,
    pub error: Option<String>,
}

/// Seeds and digests pinning a report to its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub n_reps: usize,
    pub dataset_sha256: String,
}

/// The full experiment result: one row per (scheme, L).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ConfigRow>,
    pub provenance: Provenance,
}

/// Run attacks and evaluation for every hash code size in the spec.
///
/// `on_outcome` observes every per-target [`AttackOutcome`] (the CLI streams
/// traces through it); pass a no-op closure when traces are not needed.
/// A failing configuration annotates its row instead of aborting the others.
pub fn run_experiment(
    set: &FeatureSet,
    spec: &ExperimentSpec,
    mut on_outcome: impl FnMut(usize, AttackKind, &str, &AttackOutcome),
) -> Result<ExperimentReport> {
    if spec.attacks.is_empty() {
        return Err(Error::Config("attack set is empty".into()));
    }
    if spec.l_list.is_empty() {
        return Err(Error::Config("l_list is empty".into()));
    }
    let split = crate::dataset::split_protocol(set)?;
    let digest = crate::persist::sha256_hex(&crate::dataset::canonical_bytes(set));

    let mut rows = Vec::with_capacity(spec.l_list.len());
    for &l in &spec.l_list {
        match run_one_config(&split, spec, l, &mut on_outcome) {
            Ok(row) => rows.push(row),
            Err(e) => rows.push(ConfigRow {
                scheme: spec.scheme_cfg.scheme,
                k: spec.scheme_cfg.k,
                l,
                theta_squared: f64::NAN,
                eer: f64::NAN,
                fmr: f64::NAN,
                attacks: Vec::new(),
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(ExperimentReport {
        rows,
        provenance: Provenance {
            master_seed: spec.master_seed,
            n_reps: spec.n_reps,
            dataset_sha256: digest,
        },
    })
}

fn run_one_config(
    split: &ProtocolSplit,
    spec: &ExperimentSpec,
    l: usize,
    on_outcome: &mut impl FnMut(usize, AttackKind, &str, &AttackOutcome),
) -> Result<ConfigRow> {
    let scheme = spec.scheme_cfg.scheme;
    let token = seeds::attack_token_seed(spec.master_seed, scheme.name(), l);
    let attack_params = spec.scheme_cfg.derive_params(split.dimension, l, token)?;

    let mut per_attack: Vec<(AttackKind, Vec<(String, AttackOutcome)>)> = Vec::new();
    for &kind in &spec.attacks {
        let mut outcomes = Vec::with_capacity(split.subjects.len());
        for subject in &split.subjects {
            let target = crate::objective::AttackTarget::new(
                attack_params.hash(&subject.enroll)?,
                attack_params.clone(),
            )?;
            let opt_seed =
                seeds::optimizer_seed(spec.master_seed, kind.name(), scheme.name(), l, &subject.id);
            let ga = GaConfig {
                seed: opt_seed,
                ..spec.ga.clone()
            };
            let alga = AlgaConfig {
                ga: GaConfig {
                    seed: opt_seed,
                    ..spec.alga.ga.clone()
                },
                ..spec.alga.clone()
            };
            let outcome = run_attack(kind, &target, &ga, &alga)?;
            on_outcome(l, kind, &subject.id, &outcome);
            outcomes.push((subject.id.clone(), outcome));
        }
        per_attack.push((kind, outcomes));
    }

    let env = build_verification_env(split, &spec.scheme_cfg, l, spec.n_reps, spec.master_seed)?;
    let mut attack_rows = Vec::with_capacity(per_attack.len());
    for (kind, outcomes) in &per_attack {
        let preimages: Vec<(String, FeatureVector, f64)> = outcomes
            .iter()
            .map(|(id, o)| (id.clone(), o.preimage.clone(), o.final_loss))
            .collect();
        let metrics = evaluate_with_env(split, &env, &preimages)?;
        let mean_generations = sorted_mean(
            outcomes
                .iter()
                .map(|(_, o)| o.trace.reported_generations() as f64),
        );
        let mean_time_s = sorted_mean(outcomes.iter().map(|(_, o)| o.trace.wall_time_s));
        let converged_fraction = outcomes.iter().filter(|(_, o)| o.converged).count() as f64
            / outcomes.len() as f64;
        attack_rows.push(AttackRowMetrics {
            kind: *kind,
            metrics,
            converged_fraction,
            mean_generations,
            mean_time_s,
        });
    }

    Ok(ConfigRow {
        scheme,
        k: spec.scheme_cfg.k,
        l,
        theta_squared: env.mean_theta_squared(),
        eer: env.mean_eer(),
        fmr: env.mean_fmr(),
        attacks: attack_rows,
        error: None,
    })
}
