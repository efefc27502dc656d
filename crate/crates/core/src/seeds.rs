//! Deterministic seed derivation.
//!
//! A single `master_seed` fans out into every token and optimizer seed used by
//! a run. Each sub-seed is the first eight bytes (little-endian) of
//! `SHA-256(master_seed_le || label)`, where `label` is a slash-separated
//! path naming the consumer. Re-running any slice of a pipeline therefore
//! reproduces exactly the seeds a full run would have used.

use sha2::{Digest, Sha256};

/// Derive a 64-bit sub-seed from `master` and a textual `label`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 digest is 32 bytes"))
}

/// Token seed for the attack-side (compromised) transform parameters.
pub fn attack_token_seed(master: u64, scheme: &str, l: usize) -> u64 {
    derive_seed(master, &format!("token/attack/{scheme}/L{l}"))
}

/// Token seed for the `rep`-th fresh verification-side parameters.
pub fn verify_token_seed(master: u64, scheme: &str, l: usize, rep: usize) -> u64 {
    derive_seed(master, &format!("token/verify/{scheme}/L{l}/rep{rep}"))
}

/// Optimizer seed for one attack on one subject.
pub fn optimizer_seed(master: u64, attack: &str, scheme: &str, l: usize, subject_id: &str) -> u64 {
    derive_seed(master, &format!("opt/{attack}/{scheme}/L{l}/{subject_id}"))
}
