//! Cancelable-biometric transforms and similarity-based attacks against them.
//!
//! The crate is organized around the pipeline it implements:
//!
//! - [`dataset`]: feature ingestion, synthetic data, and the enroll/verify split.
//! - [`transforms`]: token-seeded IoM hashing and BioHashing.
//! - [`matcher`]: normalized Hamming matching and threshold calibration.
//! - [`objective`]: the attack loss, per-scheme inequality constraints, and the
//!   violation measure.
//! - [`optimizer`]: a real-coded genetic algorithm and the augmented Lagrangian
//!   barrier loop used for constrained preimage search.
//! - [`attacks`]: the GASA (unconstrained) and CSA (constrained) drivers.
//! - [`evaluation`]: SAR/FAI and the TEE/TRE/VAR error decomposition under
//!   fresh verification tokens, plus whole-experiment orchestration.
//! - [`persist`]: the CSV/JSON artifact formats shared with the CLI.
//!
//! All randomness is drawn from ChaCha12 streams keyed by explicit 64-bit
//! seeds (see [`seeds`]), so every result in the crate is a pure function of
//! its inputs.

pub mod attacks;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod matcher;
pub mod objective;
pub mod optimizer;
pub mod persist;
pub mod seeds;
pub mod transforms;

pub use attacks::{csa, gasa, run_attack, AttackKind, AttackOutcome};
pub use dataset::{
    generate_synthetic, load_features, split_protocol, FeatureSet, FeatureVector, FileFormat,
    ProtocolSplit, Subject, SyntheticSpec,
};
pub use error::{Error, Result};
pub use evaluation::{
    build_verification_env, evaluate_attack, evaluate_with_env, run_experiment, AttackMetrics,
    ExperimentReport, ExperimentSpec, Scheme, SchemeConfig, VerificationEnv,
};
pub use matcher::{calibrate_threshold, hamming_distance, score_population, ThresholdCalibration};
pub use objective::{
    biohash_constraints, iom_constraints, loss, violation, AttackTarget, ConstraintVector,
    DEFAULT_BIOHASH_MARGIN,
};
pub use optimizer::{alga_minimize, ga_minimize, AlgaConfig, GaConfig, OptTrace};
pub use transforms::{
    biohash, iom_hash, Alphabet, BiohashParams, HashVector, IomParams, SchemeParams,
};
