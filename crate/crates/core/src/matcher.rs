//! Template comparison and threshold calibration.
//!
//! Matching decisions are "accept iff normalized Hamming distance <= theta";
//! theta is calibrated at the equal-error-rate operating point by an exact
//! sweep over the midpoints of the pooled score values.

use serde::{Deserialize, Serialize};

use crate::dataset::ProtocolSplit;
use crate::error::{Error, Result};
use crate::transforms::{HashVector, SchemeParams};

/// Normalized Hamming distance: the fraction of differing code positions.
pub fn hamming_distance(a: &HashVector, b: &HashVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::HashMismatch(format!(
            "lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.alphabet() != b.alphabet() {
        return Err(Error::HashMismatch(format!(
            "alphabets differ: {:?} vs {:?}",
            a.alphabet(),
            b.alphabet()
        )));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("hash vectors are empty"));
    }
    let mismatches = a
        .codes()
        .iter()
        .zip(b.codes())
        .filter(|(x, y)| x != y)
        .count();
    Ok(mismatches as f64 / a.len() as f64)
}

/// The calibrated decision threshold and its operating-point error rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCalibration {
    /// Accept iff distance <= theta.
    pub theta: f64,
    /// theta^2, reported alongside for comparison with the squared error metrics.
    pub theta_squared: f64,
    /// Equal error rate: (FNMR + FMR) / 2 at the operating point.
    pub eer: f64,
    /// False match rate at theta.
    pub fmr_at_theta: f64,
    /// False non-match rate at theta.
    pub fnmr_at_theta: f64,
}

/// Hash a split's enroll and verify samples under one parameter set.
pub struct SplitHashes {
    pub enroll: Vec<HashVector>,
    pub verify: Vec<Vec<HashVector>>,
}

pub fn hash_split(split: &ProtocolSplit, params: &SchemeParams) -> Result<SplitHashes> {
    let mut enroll = Vec::with_capacity(split.subjects.len());
    let mut verify = Vec::with_capacity(split.subjects.len());
    for subject in &split.subjects {
        enroll.push(params.hash(&subject.enroll)?);
        verify.push(
            subject
                .verify
                .iter()
                .map(|v| params.hash(v))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(SplitHashes { enroll, verify })
}

/// Genuine and impostor score lists for a split under one parameter set.
///
/// Genuine scores compare each subject's enrollment hash against that
/// subject's verify hashes; impostor scores compare it against every other
/// subject's verify hashes.
pub fn score_population(
    split: &ProtocolSplit,
    params: &SchemeParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if split.subjects.is_empty() {
        return Err(Error::EmptyInput("protocol split has no subjects"));
    }
    let hashes = hash_split(split, params)?;
    score_hashes(&hashes)
}

pub(crate) fn score_hashes(hashes: &SplitHashes) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for (i, enroll) in hashes.enroll.iter().enumerate() {
        for (j, verify_subject) in hashes.verify.iter().enumerate() {
            for v in verify_subject {
                let d = hamming_distance(enroll, v)?;
                if i == j {
                    genuine.push(d);
                } else {
                    impostor.push(d);
                }
            }
        }
    }
    Ok((genuine, impostor))
}

/// Calibrate the decision threshold at the equal-error-rate point.
///
/// Candidate thresholds are the midpoints between consecutive distinct pooled
/// scores plus a point below the minimum and the maximum itself; these cover
/// every achievable (FMR, FNMR) pair exactly. Among candidates the one with
/// the smallest |FNMR - FMR| wins, ties resolved to the smaller EER, then the
/// smaller theta. Comparisons happen on integer error counts cross-multiplied
/// by the list sizes, so they are exact.
pub fn calibrate_threshold(genuine: &[f64], impostor: &[f64]) -> Result<ThresholdCalibration> {
    if genuine.is_empty() {
        return Err(Error::EmptyInput("genuine score list is empty"));
    }
    if impostor.is_empty() {
        return Err(Error::EmptyInput("impostor score list is empty"));
    }
    let mut pooled: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    pooled.sort_by(|a, b| a.partial_cmp(b).expect("scores must not be NaN"));
    pooled.dedup();

    let mut candidates = Vec::with_capacity(pooled.len() + 1);
    candidates.push(pooled[0] - 1.0);
    for w in pooled.windows(2) {
        candidates.push((w[0] + w[1]) / 2.0);
    }
    candidates.push(*pooled.last().expect("pooled scores are non-empty"));

    let mut sorted_genuine = genuine.to_vec();
    let mut sorted_impostor = impostor.to_vec();
    sorted_genuine.sort_by(|a, b| a.partial_cmp(b).expect("scores must not be NaN"));
    sorted_impostor.sort_by(|a, b| a.partial_cmp(b).expect("scores must not be NaN"));
    let ng = sorted_genuine.len() as i128;
    let ni = sorted_impostor.len() as i128;

    // (|fnm * ni - fm * ng|, fnm * ni + fm * ng): exact order keys for
    // |FNMR - FMR| and EER over the common denominator ng * ni.
    let mut best: Option<(i128, i128, f64, i128, i128)> = None;
    for theta in candidates {
        let fm = count_at_most(&sorted_impostor, theta) as i128;
        let fnm = ng - count_at_most(&sorted_genuine, theta) as i128;
        let diff_key = (fnm * ni - fm * ng).abs();
        let eer_key = fnm * ni + fm * ng;
        let better = match &best {
            None => true,
            Some((cur_diff, cur_eer, ..)) => {
                (diff_key, eer_key) < (*cur_diff, *cur_eer)
            }
        };
        if better {
            best = Some((diff_key, eer_key, theta, fm, fnm));
        }
    }
    let (_, _, theta, fm, fnm) = best.expect("candidate list is non-empty");
    let fmr = fm as f64 / ni as f64;
    let fnmr = fnm as f64 / ng as f64;
    Ok(ThresholdCalibration {
        theta,
        theta_squared: theta * theta,
        eer: (fnmr + fmr) / 2.0,
        fmr_at_theta: fmr,
        fnmr_at_theta: fnmr,
    })
}

/// Number of `sorted` values <= `threshold`.
fn count_at_most(sorted: &[f64], threshold: f64) -> usize {
    sorted.partition_point(|v| *v <= threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, split_protocol, SyntheticSpec};
    use crate::transforms::IomParams;
    use proptest::prelude::*;
    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    use crate::transforms::Alphabet;

    fn hv(codes: &[u32], k: u32) -> HashVector {
        HashVector::new(codes.to_vec(), Alphabet::Index(k)).unwrap()
    }

    #[test]
    fn identical_hashes_have_zero_distance() {
        let a = hv(&[1, 2, 3], 4);
        assert_eq!(hamming_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn one_mismatch_of_four() {
        let a = hv(&[1, 2, 3, 4], 4);
        let b = hv(&[1, 2, 4, 4], 4);
        assert_eq!(hamming_distance(&a, &b).unwrap(), 0.25);
    }

    #[test]
    fn mismatched_inputs_error() {
        let a = hv(&[1, 2], 4);
        let b = hv(&[1, 2, 3], 4);
        assert!(hamming_distance(&a, &b).is_err());
        let c = HashVector::new(vec![1, 0], Alphabet::Bit).unwrap();
        assert!(hamming_distance(&a, &c).is_err());
    }

    #[test]
    fn distance_matches_count_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let len = 1 + (rng.next_u32() % 64) as usize;
            let k = 2 + (rng.next_u32() % 14);
            let a: Vec<u32> = (0..len).map(|_| 1 + rng.next_u32() % k).collect();
            let b: Vec<u32> = (0..len).map(|_| 1 + rng.next_u32() % k).collect();
            let mut count = 0usize;
            for i in 0..len {
                if a[i] != b[i] {
                    count += 1;
                }
            }
            let d = hamming_distance(&hv(&a, k), &hv(&b, k)).unwrap();
            assert_eq!(d, count as f64 / len as f64);
        }
    }

    #[test]
    fn scoring_counts_pairs() {
        let spec = SyntheticSpec {
            n_subjects: 2,
            samples_per_subject: 2,
            dimension: 16,
            within_class_noise: 0.1,
            seed: 21,
        };
        let split = split_protocol(&generate_synthetic(&spec).unwrap()).unwrap();
        let params = SchemeParams::Iom(IomParams::derive(5, 16, 4, 8).unwrap());
        let (genuine, impostor) = score_population(&split, &params).unwrap();
        assert_eq!(genuine.len(), 2);
        assert_eq!(impostor.len(), 2);
    }

    #[test]
    fn zero_noise_data_scores_zero_genuine() {
        let spec = SyntheticSpec {
            n_subjects: 4,
            samples_per_subject: 3,
            dimension: 16,
            within_class_noise: 0.0,
            seed: 2,
        };
        let split = split_protocol(&generate_synthetic(&spec).unwrap()).unwrap();
        let params = SchemeParams::Iom(IomParams::derive(5, 16, 4, 32).unwrap());
        let (genuine, _) = score_population(&split, &params).unwrap();
        assert!(genuine.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn genuine_scores_below_impostor_scores() {
        let spec = SyntheticSpec {
            n_subjects: 10,
            samples_per_subject: 3,
            dimension: 64,
            within_class_noise: 0.1,
            seed: 8,
        };
        let split = split_protocol(&generate_synthetic(&spec).unwrap()).unwrap();
        let params = SchemeParams::Iom(IomParams::derive(5, 64, 16, 512).unwrap());
        let (genuine, impostor) = score_population(&split, &params).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&genuine) < mean(&impostor));
    }

    #[test]
    fn separable_scores_calibrate_to_gap_midpoint() {
        let cal = calibrate_threshold(&[0.1, 0.2], &[0.3, 0.4]).unwrap();
        assert_eq!(cal.eer, 0.0);
        assert_eq!(cal.theta, 0.25);
        assert_eq!(cal.fmr_at_theta, 0.0);
    }

    #[test]
    fn indistinguishable_scores_have_half_eer() {
        let scores = [0.1, 0.25, 0.4, 0.6];
        let cal = calibrate_threshold(&scores, &scores).unwrap();
        assert!((cal.eer - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_lists_error() {
        assert!(calibrate_threshold(&[], &[0.5]).is_err());
        assert!(calibrate_threshold(&[0.5], &[]).is_err());
    }

    /// Exhaustive oracle: every pooled value plus offsets and midpoints,
    /// plain-loop counting, the same exact tie-break rule on integer counts.
    fn eer_oracle(genuine: &[f64], impostor: &[f64]) -> f64 {
        let mut candidates: Vec<f64> = Vec::new();
        let mut pooled: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
        pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, v) in pooled.iter().enumerate() {
            candidates.push(*v);
            candidates.push(*v - 1.0);
            candidates.push(*v + 1.0);
            if i + 1 < pooled.len() {
                candidates.push((pooled[i] + pooled[i + 1]) / 2.0);
            }
        }
        let ng = genuine.len() as i128;
        let ni = impostor.len() as i128;
        let mut best: Option<(i128, i128, f64)> = None;
        for theta in candidates {
            let mut fm: i128 = 0;
            for s in impostor {
                if *s <= theta {
                    fm += 1;
                }
            }
            let mut fnm: i128 = 0;
            for s in genuine {
                if *s > theta {
                    fnm += 1;
                }
            }
            let diff_key = (fnm * ni - fm * ng).abs();
            let eer_key = fnm * ni + fm * ng;
            let eer = (fnm as f64 / ng as f64 + fm as f64 / ni as f64) / 2.0;
            if best.map_or(true, |(d, e, _)| (diff_key, eer_key) < (d, e)) {
                best = Some((diff_key, eer_key, eer));
            }
        }
        best.unwrap().2
    }

    #[test]
    fn calibration_matches_sweep_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        for _ in 0..100 {
            let ng = 1 + (rng.next_u32() % 40) as usize;
            let ni = 1 + (rng.next_u32() % 40) as usize;
            // Quantized scores provoke plenty of ties.
            let genuine: Vec<f64> = (0..ng).map(|_| (rng.next_u32() % 20) as f64 / 20.0).collect();
            let impostor: Vec<f64> = (0..ni)
                .map(|_| (5 + rng.next_u32() % 15) as f64 / 20.0)
                .collect();
            let cal = calibrate_threshold(&genuine, &impostor).unwrap();
            let oracle = eer_oracle(&genuine, &impostor);
            assert!(
                (cal.eer - oracle).abs() <= 1e-12,
                "eer {} vs oracle {}",
                cal.eer,
                oracle
            );
        }
    }

    #[test]
    fn calibration_satisfies_discreteness_slack() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for _ in 0..50 {
            let genuine: Vec<f64> = (0..30).map(|_| rng.random::<f64>() * 0.6).collect();
            let impostor: Vec<f64> = (0..40).map(|_| 0.3 + rng.random::<f64>() * 0.7).collect();
            let cal = calibrate_threshold(&genuine, &impostor).unwrap();
            assert!(cal.fmr_at_theta <= cal.eer + 1.0 / impostor.len() as f64 + 1e-12);
            assert!(cal.fnmr_at_theta <= cal.eer + 1.0 / genuine.len() as f64 + 1e-12);
        }
    }

    #[test]
    fn fmr_is_monotone_in_theta() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let impostor: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let mut sorted = impostor.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prev = 0;
        for i in 0..=100 {
            let theta = i as f64 / 100.0;
            let fmr = super::count_at_most(&sorted, theta);
            assert!(fmr >= prev);
            prev = fmr;
        }
    }

    proptest! {
        #[test]
        fn hamming_is_a_metric(
            a in prop::collection::vec(1u32..=4, 12),
            b in prop::collection::vec(1u32..=4, 12),
            c in prop::collection::vec(1u32..=4, 12),
        ) {
            let (ha, hb, hc) = (hv(&a, 4), hv(&b, 4), hv(&c, 4));
            let dab = hamming_distance(&ha, &hb).unwrap();
            let dba = hamming_distance(&hb, &ha).unwrap();
            let dac = hamming_distance(&ha, &hc).unwrap();
            let dcb = hamming_distance(&hc, &hb).unwrap();
            prop_assert_eq!(dab, dba);
            prop_assert_eq!(hamming_distance(&ha, &ha).unwrap(), 0.0);
            prop_assert!((a == b) == (dab == 0.0));
            prop_assert!(dab <= dac + dcb + 1e-15);
        }
    }
}
