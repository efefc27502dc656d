//! The preimage-search objective: attack loss, per-scheme inequality
//! constraints, and the violation measure.
//!
//! For a compromised pair (hash `h`, parameters `R*`), the loss of a candidate
//! preimage is the normalized Hamming distance between `h` and the candidate's
//! transform under `R*`. IoM additionally admits `L*K` linear inequalities
//! (projection entry minus the entry at the stored code index); BioHash admits
//! one sign-consistency inequality per bit with a small margin.

use crate::dataset::FeatureVector;
use crate::error::{Error, Result};
use crate::matcher::hamming_distance;
use crate::transforms::{argmax_first, HashVector, SchemeParams};

/// Default feasibility margin for the BioHash constraints; large enough that
/// a feasible point cannot sit on the strict-inequality decision boundary.
pub const DEFAULT_BIOHASH_MARGIN: f64 = 1e-6;

/// Everything the attacker holds: the compromised template and its parameters.
#[derive(Debug, Clone)]
pub struct AttackTarget {
    hash: HashVector,
    params: SchemeParams,
}

impl AttackTarget {
    pub fn new(hash: HashVector, params: SchemeParams) -> Result<Self> {
        if hash.len() != params.code_len() {
            return Err(Error::DimensionMismatch {
                expected: params.code_len(),
                actual: hash.len(),
            });
        }
        if hash.alphabet() != params.alphabet() {
            return Err(Error::HashMismatch(format!(
                "hash alphabet {:?} does not match scheme alphabet {:?}",
                hash.alphabet(),
                params.alphabet()
            )));
        }
        Ok(Self { hash, params })
    }

    pub fn hash(&self) -> &HashVector {
        &self.hash
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn scheme_name(&self) -> &'static str {
        self.params.scheme_name()
    }

    pub fn feature_dim(&self) -> usize {
        self.params.feature_dim()
    }

    /// Number of constraint entries the scheme's constraint function emits.
    pub fn constraint_len(&self) -> usize {
        match &self.params {
            SchemeParams::Iom(p) => p.code_len() * p.subspace_dim(),
            SchemeParams::Biohash(p) => p.code_len(),
        }
    }
}

/// Values of the inequality constraints at a point; feasible iff all <= 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintVector {
    values: Vec<f64>,
}

impl ConstraintVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Max entry, the violation measure; feasible iff <= 0.
    pub fn violation(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sum of positive entries; a smoother aggregate used for ranking
    /// out-of-barrier individuals in the optimizer.
    pub fn total_positive(&self) -> f64 {
        self.values.iter().filter(|v| **v > 0.0).sum()
    }
}

/// Attack loss: normalized Hamming distance between the target hash and the
/// transform of `x_hat` under the target parameters.
pub fn loss(target: &AttackTarget, x_hat: &FeatureVector) -> Result<f64> {
    let rehash = target.params.hash(x_hat)?;
    hamming_distance(&target.hash, &rehash)
}

/// IoM inequality constraints: for each code position `l` and each `k` in
/// `[1, K]`, the entry `z_{l,k} - z_{l, h_l}` of the projected candidate.
/// The `k = h_l` entry is identically zero.
pub fn iom_constraints(target: &AttackTarget, x_hat: &FeatureVector) -> Result<ConstraintVector> {
    let SchemeParams::Iom(params) = &target.params else {
        return Err(Error::SchemeMismatch {
            expected: "iom",
            actual: target.params.scheme_name(),
        });
    };
    if x_hat.dim() != params.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.feature_dim(),
            actual: x_hat.dim(),
        });
    }
    let (_, constraints) = TargetEvaluator::new(target, DEFAULT_BIOHASH_MARGIN)
        .evaluate(x_hat.values());
    Ok(constraints)
}

/// BioHash sign-consistency constraints: entry `l` is
/// `(1 - 2 h_l) * (x_hat . b_l - tau) + margin`; non-positive entries force
/// bit `l` of the candidate's BioHash to equal `h_l` with at least `margin`.
pub fn biohash_constraints(
    target: &AttackTarget,
    x_hat: &FeatureVector,
    margin: f64,
) -> Result<ConstraintVector> {
    let SchemeParams::Biohash(params) = &target.params else {
        return Err(Error::SchemeMismatch {
            expected: "biohash",
            actual: target.params.scheme_name(),
        });
    };
    if x_hat.dim() != params.feature_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.feature_dim(),
            actual: x_hat.dim(),
        });
    }
    if !(margin >= 0.0) {
        return Err(Error::Config(format!("margin must be >= 0, got {margin}")));
    }
    let (_, constraints) = TargetEvaluator::new(target, margin).evaluate(x_hat.values());
    Ok(constraints)
}

/// The violation measure: the maximum constraint entry.
pub fn violation(c: &ConstraintVector) -> Result<f64> {
    if c.is_empty() {
        return Err(Error::EmptyInput("constraint vector is empty"));
    }
    Ok(c.violation())
}

/// Shared fast path computing loss and constraints from one projection pass.
///
/// The attack drivers evaluate this once per candidate per generation, so the
/// per-scheme projections are computed a single time and reused for both the
/// loss and the constraint entries.
#[derive(Debug, Clone, Copy)]
pub struct TargetEvaluator<'a> {
    target: &'a AttackTarget,
    biohash_margin: f64,
}

impl<'a> TargetEvaluator<'a> {
    pub fn new(target: &'a AttackTarget, biohash_margin: f64) -> Self {
        Self {
            target,
            biohash_margin,
        }
    }

    pub fn target(&self) -> &'a AttackTarget {
        self.target
    }

    /// Loss and constraint vector at `x` (dimension checked by the caller).
    pub fn evaluate(&self, x: &[f64]) -> (f64, ConstraintVector) {
        debug_assert_eq!(x.len(), self.target.feature_dim());
        let codes = self.target.hash.codes();
        match &self.target.params {
            SchemeParams::Iom(params) => {
                let k = params.subspace_dim();
                let mut z = vec![0.0; k];
                let mut constraints = Vec::with_capacity(params.code_len() * k);
                let mut mismatches = 0usize;
                for (l, &code) in codes.iter().enumerate() {
                    params.project_into(l, x, &mut z);
                    let anchor = z[(code - 1) as usize];
                    if argmax_first(&z) as u32 + 1 != code {
                        mismatches += 1;
                    }
                    for zk in &z {
                        constraints.push(zk - anchor);
                    }
                }
                (
                    mismatches as f64 / codes.len() as f64,
                    ConstraintVector::new(constraints),
                )
            }
            SchemeParams::Biohash(params) => {
                let mut constraints = Vec::with_capacity(params.code_len());
                let mut mismatches = 0usize;
                for (l, &bit) in codes.iter().enumerate() {
                    let margin_signed: f64 = params
                        .basis_vector(l)
                        .iter()
                        .zip(x)
                        .map(|(b, v)| b * v)
                        .sum::<f64>()
                        - params.tau();
                    let rebit = u32::from(margin_signed > 0.0);
                    if rebit != bit {
                        mismatches += 1;
                    }
                    let sign = 1.0 - 2.0 * f64::from(bit);
                    constraints.push(sign * margin_signed + self.biohash_margin);
                }
                (
                    mismatches as f64 / codes.len() as f64,
                    ConstraintVector::new(constraints),
                )
            }
        }
    }

    /// Loss only; same transform path, skipping constraint assembly.
    pub fn evaluate_loss(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.target.feature_dim());
        let rehash = self
            .target
            .params
            .hash_slice(x)
            .expect("dimension verified at construction");
        hamming_distance(&self.target.hash, &rehash).expect("same params produce compatible hashes")
    }
}
