//! Token-seeded cancelable transforms: IoM hashing and BioHashing.
//!
//! Parameter material is drawn from a ChaCha12 stream keyed by the 64-bit
//! token seed (entries in `(l, k, n)` row-major order for IoM, `(l, n)` for
//! BioHash), so a token seed reproduces the same transform on any platform
//! running the same crate versions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::dataset::FeatureVector;
use crate::error::{Error, Result};

/// IoM hashing material: `L` matrices of shape `K x N`, i.i.d. standard normal.
#[derive(Debug, Clone, PartialEq)]
pub struct IomParams {
    token_seed: u64,
    n: usize,
    k: usize,
    l: usize,
    // l * k * n entries, matrix-major then row-major.
    entries: Vec<f64>,
}

impl IomParams {
    /// Draw the `L` projection matrices for `token_seed`.
    pub fn derive(token_seed: u64, n: usize, k: usize, l: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::Config(format!("feature dimension must be >= 1, got {n}")));
        }
        if k < 2 {
            return Err(Error::Config(format!("subspace dimension K must be >= 2, got {k}")));
        }
        if l < 1 {
            return Err(Error::Config(format!("hash code size L must be >= 1, got {l}")));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(token_seed);
        let entries = (0..l * k * n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok(Self {
            token_seed,
            n,
            k,
            l,
            entries,
        })
    }

    pub fn token_seed(&self) -> u64 {
        self.token_seed
    }

    pub fn feature_dim(&self) -> usize {
        self.n
    }

    pub fn subspace_dim(&self) -> usize {
        self.k
    }

    pub fn code_len(&self) -> usize {
        self.l
    }

    /// Row-major `K x N` matrix for code position `l` (0-based).
    pub fn matrix(&self, l: usize) -> &[f64] {
        &self.entries[l * self.k * self.n..(l + 1) * self.k * self.n]
    }

    /// Project `x` onto subspace `l`, writing the `K` coordinates into `out`.
    #[inline]
    pub fn project_into(&self, l: usize, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.k);
        let m = self.matrix(l);
        for (k, slot) in out.iter_mut().enumerate() {
            let row = &m[k * self.n..(k + 1) * self.n];
            *slot = dot(row, x);
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// BioHashing material: `L` token-derived vectors of dimension `N` plus the
/// discretization threshold `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiohashParams {
    token_seed: u64,
    n: usize,
    l: usize,
    tau: f64,
    orthonormal: bool,
    // l * n entries, vector-major.
    basis: Vec<f64>,
}

impl BiohashParams {
    /// Draw the basis for `token_seed`. With `orthonormalize` the Gaussian
    /// draws are Gram-Schmidt orthonormalized (requires `l <= n`); without it
    /// the raw draws are kept for ablation.
    pub fn derive(token_seed: u64, n: usize, l: usize, tau: f64, orthonormalize: bool) -> Result<Self> {
        if n < 1 {
            return Err(Error::Config(format!("feature dimension must be >= 1, got {n}")));
        }
        if l < 1 {
            return Err(Error::Config(format!("hash code size L must be >= 1, got {l}")));
        }
        if l > n {
            return Err(Error::Config(format!(
                "BioHash requires L <= N, got L={l}, N={n}"
            )));
        }
        if !tau.is_finite() {
            return Err(Error::Config(format!("tau must be finite, got {tau}")));
        }
        let mut rng = ChaCha12Rng::seed_from_u64(token_seed);
        let mut basis = vec![0.0; l * n];
        let mut i = 0;
        while i < l {
            for slot in &mut basis[i * n..(i + 1) * n] {
                *slot = rng.sample::<f64, _>(StandardNormal);
            }
            if orthonormalize {
                // Modified Gram-Schmidt against the already-fixed vectors.
                for j in 0..i {
                    let proj = {
                        let (prev, cur) = basis.split_at(i * n);
                        dot(&prev[j * n..(j + 1) * n], &cur[..n])
                    };
                    for t in 0..n {
                        basis[i * n + t] -= proj * basis[j * n + t];
                    }
                }
                let norm = dot(&basis[i * n..(i + 1) * n], &basis[i * n..(i + 1) * n]).sqrt();
                if norm < 1e-10 {
                    // numerically dependent draw; redraw this vector
                    continue;
                }
                for slot in &mut basis[i * n..(i + 1) * n] {
                    *slot /= norm;
                }
            }
            i += 1;
        }
        Ok(Self {
            token_seed,
            n,
            l,
            tau,
            orthonormal: orthonormalize,
            basis,
        })
    }

    pub fn token_seed(&self) -> u64 {
        self.token_seed
    }

    pub fn feature_dim(&self) -> usize {
        self.n
    }

    pub fn code_len(&self) -> usize {
        self.l
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    /// Basis vector for code position `l` (0-based).
    pub fn basis_vector(&self, l: usize) -> &[f64] {
        &self.basis[l * self.n..(l + 1) * self.n]
    }

    #[cfg(test)]
    pub(crate) fn flip_vector_sign(&mut self, l: usize) {
        for v in &mut self.basis[l * self.n..(l + 1) * self.n] {
            *v = -*v;
        }
    }
}

/// Code alphabet of a protected template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Alphabet {
    /// IoM: 1-based indices in `[1, K]`.
    Index(u32),
    /// BioHash: bits `{0, 1}`.
    Bit,
}

impl Alphabet {
    pub fn size(&self) -> u32 {
        match self {
            Alphabet::Index(k) => *k,
            Alphabet::Bit => 2,
        }
    }

    fn contains(&self, code: u32) -> bool {
        match self {
            Alphabet::Index(k) => (1..=*k).contains(&code),
            Alphabet::Bit => code <= 1,
        }
    }
}

/// A protected template: `L` codes over a fixed alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HashVector {
    codes: Vec<u32>,
    alphabet: Alphabet,
}

impl HashVector {
    pub fn new(codes: Vec<u32>, alphabet: Alphabet) -> Result<Self> {
        if alphabet.size() < 2 {
            return Err(Error::Config(format!("alphabet must be >= 2, got {alphabet:?}")));
        }
        if let Some(bad) = codes.iter().find(|c| !alphabet.contains(**c)) {
            return Err(Error::Config(format!(
                "code {bad} outside alphabet {alphabet:?}"
            )));
        }
        Ok(Self { codes, alphabet })
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

/// Index (0-based) of the maximum entry, ties resolved to the lowest index.
#[inline]
pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: x.len(),
        });
    }
    Ok(())
}

/// IoM-hash a feature vector: code `l` is the 1-based argmax of `R_l x`.
pub fn iom_hash(params: &IomParams, x: &FeatureVector) -> Result<HashVector> {
    iom_hash_slice(params, x.values())
}

pub(crate) fn iom_hash_slice(params: &IomParams, x: &[f64]) -> Result<HashVector> {
    check_dim(params.n, x)?;
    let mut z = vec![0.0; params.k];
    let mut codes = Vec::with_capacity(params.l);
    for l in 0..params.l {
        params.project_into(l, x, &mut z);
        codes.push(argmax_first(&z) as u32 + 1);
    }
    HashVector::new(codes, Alphabet::Index(params.k as u32))
}

/// BioHash a feature vector: bit `l` is 1 iff `x . b_l - tau > 0`.
pub fn biohash(params: &BiohashParams, x: &FeatureVector) -> Result<HashVector> {
    biohash_slice(params, x.values())
}

pub(crate) fn biohash_slice(params: &BiohashParams, x: &[f64]) -> Result<HashVector> {
    check_dim(params.n, x)?;
    let codes = (0..params.l)
        .map(|l| u32::from(dot(params.basis_vector(l), x) - params.tau > 0.0))
        .collect();
    HashVector::new(codes, Alphabet::Bit)
}

/// Parameters for either transform, tagged by scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeParams {
    Iom(IomParams),
    Biohash(BiohashParams),
}

impl SchemeParams {
    pub fn scheme_name(&self) -> &'static str {
        match self {
            SchemeParams::Iom(_) => "iom",
            SchemeParams::Biohash(_) => "biohash",
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            SchemeParams::Iom(p) => p.feature_dim(),
            SchemeParams::Biohash(p) => p.feature_dim(),
        }
    }

    pub fn code_len(&self) -> usize {
        match self {
            SchemeParams::Iom(p) => p.code_len(),
            SchemeParams::Biohash(p) => p.code_len(),
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        match self {
            SchemeParams::Iom(p) => Alphabet::Index(p.subspace_dim() as u32),
            SchemeParams::Biohash(_) => Alphabet::Bit,
        }
    }

    /// Apply the transform this parameter set describes.
    pub fn hash(&self, x: &FeatureVector) -> Result<HashVector> {
        self.hash_slice(x.values())
    }

    pub(crate) fn hash_slice(&self, x: &[f64]) -> Result<HashVector> {
        match self {
            SchemeParams::Iom(p) => iom_hash_slice(p, x),
            SchemeParams::Biohash(p) => biohash_slice(p, x),
        }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub(crate) fn set_iom_entries(params: &mut IomParams, entries: Vec<f64>) {
        assert_eq!(entries.len(), params.l * params.k * params.n);
        params.entries = entries;
    }

    pub(crate) fn set_biohash_basis(params: &mut BiohashParams, basis: Vec<f64>) {
        assert_eq!(basis.len(), params.l * params.n);
        params.basis = basis;
    }
}
