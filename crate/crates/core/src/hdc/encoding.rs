use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{clip_factor, Hypervector};
use crate::{Error, Result};

/// A raw input: `S` pixel intensities and a 0-based class label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub pixels: Vec<u8>,
    pub label: usize,
}

/// Position and level hypervectors for record-based encoding.
///
/// Position vectors are independent uniform bipolar vectors. Level vectors
/// start from a random level-0 vector; level `l` flips the first
/// `l * ceil(d / (2 (L - 1)))` coordinates of a seeded random coordinate
/// order, so neighbouring levels are close and the extremes sit about `d/2`
/// apart.
#[derive(Clone, Debug)]
pub struct ItemMemory {
    seed: u64,
    dim: usize,
    positions: Vec<Vec<i8>>,
    levels: Vec<Vec<i8>>,
    flip_order: Vec<u32>,
    flip_step: usize,
    // P_s ⊙ V(0) with coordinates permuted into flip order, row per position
    bound_level0: Vec<i8>,
    // Σ_s P_s ⊙ V(0), flip order
    baseline: Vec<i16>,
}

impl ItemMemory {
    /// Build the memory for `positions` pixels, `levels` intensity levels and
    /// dimension `dim`. Identical arguments give identical memories.
    pub fn generate(seed: u64, positions: usize, levels: usize, dim: usize) -> Result<Self> {
        if positions == 0 || levels == 0 || dim == 0 {
            return Err(Error::invalid("item memory needs positions, levels and dimension >= 1"));
        }
        if positions > i16::MAX as usize {
            return Err(Error::invalid(format!("at most {} positions supported, got {positions}", i16::MAX)));
        }
        if dim > u32::MAX as usize {
            return Err(Error::invalid("dimension too large"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let position_hvs: Vec<Vec<i8>> = (0..positions).map(|_| random_signs(&mut rng, dim)).collect();
        let level0 = random_signs(&mut rng, dim);
        let mut flip_order: Vec<u32> = (0..dim as u32).collect();
        flip_order.shuffle(&mut rng);
        let flip_step = if levels > 1 { dim.div_ceil(2 * (levels - 1)) } else { 0 };

        let level_hvs = (0..levels)
            .map(|l| {
                let mut v = level0.clone();
                for &k in &flip_order[..(l * flip_step).min(dim)] {
                    v[k as usize] = -v[k as usize];
                }
                v
            })
            .collect();

        let mut bound_level0 = vec![0i8; positions * dim];
        let mut baseline = vec![0i16; dim];
        for (p, row) in position_hvs.iter().zip(bound_level0.chunks_exact_mut(dim)) {
            for ((dst, &k), acc) in row.iter_mut().zip(&flip_order).zip(baseline.iter_mut()) {
                let k = k as usize;
                *dst = p[k] * level0[k];
                *acc += i16::from(*dst);
            }
        }

        Ok(ItemMemory {
            seed,
            dim,
            positions: position_hvs,
            levels: level_hvs,
            flip_order,
            flip_step,
            bound_level0,
            baseline,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_positions(&self) -> usize {
        self.positions.len()
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn position(&self, s: usize) -> Hypervector {
        Hypervector::from_bipolar(&self.positions[s])
    }

    pub fn level(&self, l: usize) -> Hypervector {
        Hypervector::from_bipolar(&self.levels[l])
    }

    /// Quantized level of a pixel intensity.
    #[inline]
    pub fn level_of(&self, intensity: u8) -> usize {
        usize::from(intensity) * self.levels.len() / 256
    }

    /// The value hypervector `V(a)` for an intensity.
    pub fn value(&self, intensity: u8) -> Hypervector {
        self.level(self.level_of(intensity))
    }

    /// Encode pixels as `sign(Σ_s P_s ⊙ V(a_s))`, ties mapping to `+1`.
    pub fn encode_signs(&self, pixels: &[u8]) -> Result<Vec<i8>> {
        let mut out = vec![0i8; self.dim];
        let mut acc = Vec::with_capacity(self.dim);
        self.encode_into(pixels, &mut acc, &mut out)?;
        Ok(out)
    }

    fn encode_into(&self, pixels: &[u8], acc: &mut Vec<i16>, out: &mut [i8]) -> Result<()> {
        if pixels.len() != self.positions.len() {
            return Err(Error::DimensionMismatch { expected: self.positions.len(), found: pixels.len() });
        }
        let d = self.dim;
        acc.clear();
        acc.extend_from_slice(&self.baseline);
        // V(l) differs from V(0) exactly on a prefix of the flip order, where
        // P_s ⊙ V(l) = -(P_s ⊙ V(0)).
        for (s, &a) in pixels.iter().enumerate() {
            let n = (self.level_of(a) * self.flip_step).min(d);
            if n == 0 {
                continue;
            }
            let row = &self.bound_level0[s * d..s * d + n];
            for (x, &b) in acc[..n].iter_mut().zip(row) {
                *x -= 2 * i16::from(b);
            }
        }
        for (&x, &k) in acc.iter().zip(&self.flip_order) {
            out[k as usize] = if x >= 0 { 1 } else { -1 };
        }
        Ok(())
    }

    /// Encode one sample into a bipolar hypervector of norm `sqrt(d)`.
    pub fn encode_sample(&self, sample: &Sample) -> Result<Hypervector> {
        Ok(Hypervector::from_bipolar(&self.encode_signs(&sample.pixels)?))
    }
}

fn random_signs(rng: &mut ChaCha8Rng, dim: usize) -> Vec<i8> {
    let mut out = Vec::with_capacity(dim);
    while out.len() < dim {
        let bits = rng.next_u64();
        let take = (dim - out.len()).min(64);
        out.extend((0..take).map(|b| if (bits >> b) & 1 == 1 { 1i8 } else { -1 }));
    }
    out
}

/// Encoded (and optionally clipped) samples stored as packed signs.
///
/// Every encoded sample is bipolar, so clipping is a single common scale
/// factor `min(1, kappa / sqrt(d))`.
#[derive(Clone, Debug)]
pub struct EncodedBatch {
    dim: usize,
    signs: Vec<i8>,
    labels: Vec<usize>,
    scale: f64,
}

impl EncodedBatch {
    /// Encode `samples`, clipping to `kappa` when given.
    pub fn encode<'a, I>(im: &ItemMemory, samples: I, kappa: Option<f64>) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Sample>,
    {
        let samples: Vec<&Sample> = samples.into_iter().collect();
        let d = im.dim();
        let scale = match kappa {
            Some(k) => clip_factor((d as f64).sqrt(), k)?,
            None => 1.0,
        };
        let mut signs = vec![0i8; samples.len() * d];
        signs.par_chunks_mut(d).zip(samples.par_iter()).try_for_each_init(
            || Vec::with_capacity(d),
            |acc, (row, sample)| im.encode_into(&sample.pixels, acc, row),
        )?;
        Ok(EncodedBatch { dim: d, signs, labels: samples.iter().map(|s| s.label).collect(), scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Re-apply clipping with a new bound (or none) without re-encoding.
    pub fn reclip(&mut self, kappa: Option<f64>) -> Result<()> {
        self.scale = match kappa {
            Some(k) => clip_factor((self.dim as f64).sqrt(), k)?,
            None => 1.0,
        };
        Ok(())
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row_signs(&self, i: usize) -> &[i8] {
        &self.signs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn hypervector(&self, i: usize) -> Hypervector {
        Hypervector(self.row_signs(i).iter().map(|&s| self.scale * f64::from(s)).collect())
    }
}

impl super::SampleSet for EncodedBatch {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    fn dot(&self, i: usize, v: &[f64]) -> f64 {
        let row = self.row_signs(i);
        let mut acc = [0.0f64; 4];
        let chunks = row.len() / 4;
        for c in 0..chunks {
            let k = 4 * c;
            acc[0] += f64::from(row[k]) * v[k];
            acc[1] += f64::from(row[k + 1]) * v[k + 1];
            acc[2] += f64::from(row[k + 2]) * v[k + 2];
            acc[3] += f64::from(row[k + 3]) * v[k + 3];
        }
        let mut tail = 0.0;
        for k in 4 * chunks..row.len() {
            tail += f64::from(row[k]) * v[k];
        }
        self.scale * ((acc[0] + acc[1]) + (acc[2] + acc[3]) + tail)
    }

    fn add_to(&self, i: usize, alpha: f64, v: &mut [f64]) {
        let a = alpha * self.scale;
        for (x, &s) in v.iter_mut().zip(self.row_signs(i)) {
            *x += a * f64::from(s);
        }
    }

    fn norm_sq(&self, _i: usize) -> f64 {
        self.scale * self.scale * self.dim as f64
    }

    fn sign_agreement(&self, i: usize, v: &[f64]) -> usize {
        self.row_signs(i).iter().zip(v).filter(|(&s, &x)| (s > 0) == (x >= 0.0)).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hdc::{bind, bundle, cosine, SampleSet};

    /// Direct Σ_s P_s ⊙ V(a_s) followed by sign binarization.
    fn reference_encode(im: &ItemMemory, pixels: &[u8]) -> Hypervector {
        let terms: Vec<Hypervector> =
            pixels.iter().enumerate().map(|(s, &a)| bind(&im.position(s), &im.value(a)).unwrap()).collect();
        let sum = bundle(&terms).unwrap();
        Hypervector(sum.values().iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect())
    }

    #[test]
    fn memory_shape_and_alphabet() {
        let im = ItemMemory::generate(7, 784, 16, 10_000).unwrap();
        assert_eq!(im.num_positions() + im.num_levels(), 800);
        for s in 0..784 {
            assert!(im.positions[s].iter().all(|&v| v == 1 || v == -1));
        }
        for l in 0..16 {
            assert!(im.level(l).is_bipolar());
        }
    }

    #[test]
    fn memory_is_deterministic() {
        let a = ItemMemory::generate(7, 64, 16, 2_000).unwrap();
        let b = ItemMemory::generate(7, 64, 16, 2_000).unwrap();
        assert_eq!(a.positions, b.positions);
        assert_eq!(a.levels, b.levels);
        let c = ItemMemory::generate(8, 64, 16, 2_000).unwrap();
        assert_ne!(a.positions, c.positions);
    }

    #[test]
    fn extreme_levels_are_quasi_orthogonal() {
        let d = 10_000usize;
        let tol = 3.0 * (d as f64).sqrt();
        for seed in 0..5 {
            let im = ItemMemory::generate(seed, 1, 16, d).unwrap();
            let h = im.level(0).hamming(&im.level(15)).unwrap() as f64;
            assert!((h - d as f64 / 2.0).abs() <= tol, "seed {seed}: {h}");
            // adjacent levels differ by one flip step
            let h1 = im.level(3).hamming(&im.level(4)).unwrap();
            assert_eq!(h1, d.div_ceil(30));
        }
    }

    #[test]
    fn rejects_bad_shape() {
        assert!(ItemMemory::generate(1, 0, 16, 10).is_err());
        assert!(ItemMemory::generate(1, 4, 0, 10).is_err());
        assert!(ItemMemory::generate(1, 4, 16, 0).is_err());
    }

    #[test]
    fn single_pixel_encoding_is_the_bound_pair() {
        let im = ItemMemory::generate(3, 1, 16, 1_000).unwrap();
        for a in [0u8, 17, 128, 255] {
            let h = im.encode_sample(&Sample { pixels: vec![a], label: 0 }).unwrap();
            assert_eq!(h, bind(&im.position(0), &im.value(a)).unwrap());
        }
    }

    #[test]
    fn fast_encoder_matches_reference() {
        let im = ItemMemory::generate(11, 36, 16, 3_001).unwrap();
        let mut state = 12345u32;
        for _ in 0..5 {
            let pixels: Vec<u8> = (0..36)
                .map(|_| {
                    state = state.wrapping_mul(1_103_515_245).wrapping_add(12345);
                    (state >> 16) as u8
                })
                .collect();
            let fast = im.encode_sample(&Sample { pixels: pixels.clone(), label: 0 }).unwrap();
            assert_eq!(fast, reference_encode(&im, &pixels));
        }
    }

    #[test]
    fn encoding_norm_is_sqrt_d_and_ties_go_positive() {
        let im = ItemMemory::generate(5, 2, 2, 512).unwrap();
        // two positions: sums are 0 or ±2, zeros must become +1
        let h = im.encode_sample(&Sample { pixels: vec![0, 255], label: 0 }).unwrap();
        assert!(h.is_bipolar());
        assert!((h.norm() - (512f64).sqrt()).abs() < 1e-12);
        let p0 = bind(&im.position(0), &im.value(0)).unwrap();
        let p1 = bind(&im.position(1), &im.value(255)).unwrap();
        for k in 0..512 {
            if p0.values()[k] + p1.values()[k] == 0.0 {
                assert_eq!(h.values()[k], 1.0);
            }
        }
    }

    #[test]
    fn one_pixel_change_keeps_encodings_close() {
        // one pixel moved by one quantization level
        let im = ItemMemory::generate(21, 784, 16, 10_000).unwrap();
        let pixels: Vec<u8> = (0..784).map(|i| ((i * 37) % 256) as u8).collect();
        for pos in [0, 400, 783] {
            let mut other = pixels.clone();
            other[pos] = if other[pos] >= 16 { other[pos] - 16 } else { other[pos] + 16 };
            let a = im.encode_sample(&Sample { pixels: pixels.clone(), label: 0 }).unwrap();
            let b = im.encode_sample(&Sample { pixels: other, label: 0 }).unwrap();
            assert!(cosine(&a, &b).unwrap() > 0.99);
        }
    }

    #[test]
    fn wrong_pixel_count_is_rejected() {
        let im = ItemMemory::generate(1, 4, 4, 64).unwrap();
        let err = im.encode_signs(&[1, 2, 3]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 4, found: 3 }));
    }

    #[test]
    fn batch_applies_clip_scale() {
        let im = ItemMemory::generate(1, 4, 4, 10_000).unwrap();
        let samples =
            vec![Sample { pixels: vec![0, 50, 100, 200], label: 1 }, Sample { pixels: vec![9, 9, 9, 9], label: 0 }];
        let batch = EncodedBatch::encode(&im, &samples, Some(50.0)).unwrap();
        assert_eq!(batch.len(), 2);
        assert_eq!(batch.scale(), 0.5);
        let h = batch.hypervector(0);
        assert!((h.norm() - 50.0).abs() < 1e-9);
        assert_eq!(h, im.encode_sample(&samples[0]).unwrap().scaled(0.5));
        assert!((batch.norm_sq(1) - 2500.0).abs() < 1e-9);
        let v: Vec<f64> = (0..10_000).map(|k| (k % 7) as f64 - 3.0).collect();
        let direct = h.dot(&Hypervector::new(v.clone()).unwrap()).unwrap();
        assert!((batch.dot(0, &v) - direct).abs() < 1e-9);
    }
}
