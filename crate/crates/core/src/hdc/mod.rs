//! Hypervector algebra, record-based encoding and associative memories.
//!
//! Hypervectors are dense `f64` vectors. Bipolar vectors (entries in
//! `{+1, -1}`) come out of the item memory and the encoder; bundling produces
//! integer sums; clipping and DP noise produce general real vectors.

mod encoding;
mod memory;

pub use encoding::{EncodedBatch, ItemMemory, Sample};
pub(crate) use memory::predict_all;
pub use memory::{
    infer, retrain_against, retrain_pass, train_am, AssociativeMemory, LabeledHv, SampleSet, Similarity, Subset,
    TrainerConfig,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A dense hypervector of fixed dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hypervector(Vec<f64>);

impl Hypervector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("hypervector must have dimension >= 1"));
        }
        Ok(Hypervector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Hypervector(vec![0.0; dim])
    }

    pub fn ones(dim: usize) -> Self {
        Hypervector(vec![1.0; dim])
    }

    pub fn from_bipolar(signs: &[i8]) -> Self {
        Hypervector(signs.iter().map(|&s| f64::from(s)).collect())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    /// True when every entry is exactly `+1` or `-1`.
    pub fn is_bipolar(&self) -> bool {
        self.0.iter().all(|&v| v == 1.0 || v == -1.0)
    }

    pub fn dot(&self, other: &Hypervector) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn scaled(&self, factor: f64) -> Hypervector {
        Hypervector(self.0.iter().map(|v| v * factor).collect())
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &Hypervector) -> Result<()> {
        check_dim(self.dim(), other.dim())?;
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// Hamming distance between the sign patterns (zero counts as `+1`).
    pub fn hamming(&self, other: &Hypervector) -> Result<usize> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.0.iter().zip(&other.0).filter(|(a, b)| (**a >= 0.0) != (**b >= 0.0)).count())
    }
}

/// Elementwise product.
pub fn bind(a: &Hypervector, b: &Hypervector) -> Result<Hypervector> {
    check_dim(a.dim(), b.dim())?;
    Ok(Hypervector(a.0.iter().zip(&b.0).map(|(x, y)| x * y).collect()))
}

/// Elementwise sum of a non-empty list.
pub fn bundle(hs: &[Hypervector]) -> Result<Hypervector> {
    let first = hs.first().ok_or(Error::EmptyInput("bundle of no hypervectors"))?;
    let mut acc = first.clone();
    for h in &hs[1..] {
        acc.add_scaled(1.0, h)?;
    }
    Ok(acc)
}

/// Scale `h` by `min(1, kappa / ||h||)` so its norm never exceeds `kappa`.
pub fn clip(h: &Hypervector, kappa: f64) -> Result<Hypervector> {
    let factor = clip_factor(h.norm(), kappa)?;
    if factor == 1.0 {
        return Ok(h.clone());
    }
    Ok(h.scaled(factor))
}

/// The multiplier applied by [`clip`] to a vector of the given norm.
pub fn clip_factor(norm: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::invalid(format!("clip bound must be positive, got {kappa}")));
    }
    if norm <= kappa {
        Ok(1.0)
    } else {
        Ok(kappa / norm)
    }
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &Hypervector, b: &Hypervector) -> Result<f64> {
    let ab = a.dot(b)?;
    let denom = a.norm() * b.norm();
    Ok(if denom == 0.0 { 0.0 } else { ab / denom })
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators keep the loop vectorizable
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
