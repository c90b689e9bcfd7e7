use serde::{Deserialize, Serialize};

use super::{check_dim, dot, Hypervector};
use crate::{Error, Result};

/// Similarity used for nearest-prototype inference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    #[default]
    Cosine,
    /// Number of coordinates whose signs agree (higher is more similar).
    Hamming,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub eta: f64,
    pub similarity: Similarity,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig { eta: 1.0, similarity: Similarity::Cosine }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid(format!("learning rate must be finite and >= 0, got {}", self.eta)));
        }
        Ok(())
    }
}

/// Read access to a list of labelled, already encoded samples.
///
/// Implemented for plain hypervector lists and for the packed
/// [`EncodedBatch`](super::EncodedBatch), so training code runs unchanged on
/// both.
pub trait SampleSet {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn label(&self, i: usize) -> usize;
    fn dot(&self, i: usize, v: &[f64]) -> f64;
    /// `v += alpha * sample_i`
    fn add_to(&self, i: usize, alpha: f64, v: &mut [f64]);
    fn norm_sq(&self, i: usize) -> f64;
    fn sign_agreement(&self, i: usize, v: &[f64]) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledHv {
    pub hv: Hypervector,
    pub label: usize,
}

impl SampleSet for [LabeledHv] {
    fn dim(&self) -> usize {
        self.first().map_or(0, |s| s.hv.dim())
    }

    fn len(&self) -> usize {
        <[LabeledHv]>::len(self)
    }

    fn label(&self, i: usize) -> usize {
        self[i].label
    }

    fn dot(&self, i: usize, v: &[f64]) -> f64 {
        dot(self[i].hv.values(), v)
    }

    fn add_to(&self, i: usize, alpha: f64, v: &mut [f64]) {
        for (x, y) in v.iter_mut().zip(self[i].hv.values()) {
            *x += alpha * y;
        }
    }

    fn norm_sq(&self, i: usize) -> f64 {
        self[i].hv.norm_sq()
    }

    fn sign_agreement(&self, i: usize, v: &[f64]) -> usize {
        self[i].hv.values().iter().zip(v).filter(|(a, b)| (**a >= 0.0) == (**b >= 0.0)).count()
    }
}

/// The rows `indices` of another sample set, in that order.
#[derive(Clone, Copy, Debug)]
pub struct Subset<'a, S: ?Sized> {
    inner: &'a S,
    indices: &'a [usize],
}

impl<'a, S: SampleSet + ?Sized> Subset<'a, S> {
    pub fn new(inner: &'a S, indices: &'a [usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= inner.len()) {
            return Err(Error::invalid(format!("subset index {bad} out of range for {} samples", inner.len())));
        }
        Ok(Subset { inner, indices })
    }
}

impl<S: SampleSet + ?Sized> SampleSet for Subset<'_, S> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn len(&self) -> usize {
        self.indices.len()
    }

    fn label(&self, i: usize) -> usize {
        self.inner.label(self.indices[i])
    }

    fn dot(&self, i: usize, v: &[f64]) -> f64 {
        self.inner.dot(self.indices[i], v)
    }

    fn add_to(&self, i: usize, alpha: f64, v: &mut [f64]) {
        self.inner.add_to(self.indices[i], alpha, v)
    }

    fn norm_sq(&self, i: usize) -> f64 {
        self.inner.norm_sq(self.indices[i])
    }

    fn sign_agreement(&self, i: usize, v: &[f64]) -> usize {
        self.inner.sign_agreement(self.indices[i], v)
    }
}

/// One prototype hypervector per class, indexed by 0-based label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssociativeMemory {
    classes: Vec<Hypervector>,
}

impl AssociativeMemory {
    pub fn zeros(num_classes: usize, dim: usize) -> Self {
        AssociativeMemory { classes: vec![Hypervector::zeros(dim); num_classes] }
    }

    pub fn from_classes(classes: Vec<Hypervector>) -> Result<Self> {
        let first = classes.first().ok_or(Error::EmptyInput("associative memory needs at least one class"))?;
        let d = first.dim();
        for c in &classes {
            check_dim(d, c.dim())?;
        }
        Ok(AssociativeMemory { classes })
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dim(&self) -> usize {
        self.classes.first().map_or(0, Hypervector::dim)
    }

    pub fn classes(&self) -> &[Hypervector] {
        &self.classes
    }

    pub fn class(&self, n: usize) -> &Hypervector {
        &self.classes[n]
    }

    pub fn class_mut(&mut self, n: usize) -> &mut Hypervector {
        &mut self.classes[n]
    }

    pub fn is_untrained(&self) -> bool {
        self.classes.iter().all(Hypervector::is_zero)
    }

    pub fn same_shape(&self, other: &AssociativeMemory) -> Result<()> {
        check_dim(self.num_classes(), other.num_classes())?;
        check_dim(self.dim(), other.dim())
    }
}

/// Per-class state needed to score queries quickly.
struct Scorer {
    norms_sq: Vec<f64>,
    similarity: Similarity,
}

impl Scorer {
    fn new(am: &AssociativeMemory, similarity: Similarity) -> Self {
        Scorer { norms_sq: am.classes.iter().map(Hypervector::norm_sq).collect(), similarity }
    }

    /// Returns the predicted class and the query's dot product with every
    /// class (cosine only), or `None` when every prototype is zero.
    fn predict<S: SampleSet + ?Sized>(
        &self,
        am: &AssociativeMemory,
        set: &S,
        i: usize,
        dots: &mut Vec<f64>,
    ) -> Option<usize> {
        dots.clear();
        let mut best: Option<(usize, f64)> = None;
        for (n, class) in am.classes.iter().enumerate() {
            let score = match self.similarity {
                Similarity::Cosine => {
                    let dp = set.dot(i, class.values());
                    dots.push(dp);
                    if self.norms_sq[n] == 0.0 {
                        continue;
                    }
                    dp / self.norms_sq[n].sqrt()
                }
                Similarity::Hamming => {
                    dots.push(0.0);
                    if self.norms_sq[n] == 0.0 {
                        continue;
                    }
                    set.sign_agreement(i, class.values()) as f64
                }
            };
            // strict comparison keeps the smallest index on ties
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((n, score));
            }
        }
        best.map(|(n, _)| n)
    }

    fn apply_update<S: SampleSet + ?Sized>(
        &mut self,
        am: &mut AssociativeMemory,
        set: &S,
        i: usize,
        class: usize,
        alpha: f64,
        dot_with_class: Option<f64>,
    ) {
        let values = am.classes[class].values_mut();
        let dp = dot_with_class.unwrap_or_else(|| set.dot(i, values));
        set.add_to(i, alpha, values);
        let updated = self.norms_sq[class] + 2.0 * alpha * dp + alpha * alpha * set.norm_sq(i);
        self.norms_sq[class] = updated.max(0.0);
    }
}

/// Sum the samples of each class into its prototype.
pub fn train_am<S: SampleSet + ?Sized>(samples: &S, num_classes: usize) -> Result<AssociativeMemory> {
    if num_classes == 0 {
        return Err(Error::invalid("class count must be >= 1"));
    }
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples to train on"));
    }
    let mut am = AssociativeMemory::zeros(num_classes, samples.dim());
    for i in 0..samples.len() {
        let label = samples.label(i);
        if label >= num_classes {
            return Err(Error::LabelOutOfRange { label, classes: num_classes });
        }
        samples.add_to(i, 1.0, am.classes[label].values_mut());
    }
    Ok(am)
}

/// Nearest prototype by `similarity`. Zero prototypes never win; ties go to
/// the smallest class index.
pub fn infer(query: &Hypervector, am: &AssociativeMemory, similarity: Similarity) -> Result<usize> {
    check_dim(am.dim(), query.dim())?;
    let scorer = Scorer::new(am, similarity);
    let single = [LabeledHv { hv: query.clone(), label: 0 }];
    scorer.predict(am, &single[..], 0, &mut Vec::new()).ok_or(Error::UntrainedMemory)
}

/// One error-driven pass over `samples`, updating `am` sample by sample.
///
/// A misclassified sample is subtracted (scaled by `eta`) from the predicted
/// class and added to its true class. Returns the number of
/// misclassifications. A memory whose prototypes are all zero predicts
/// nothing, so each sample is simply added to its class.
pub fn retrain_pass<S: SampleSet + ?Sized>(
    am: &mut AssociativeMemory,
    samples: &S,
    config: &TrainerConfig,
) -> Result<usize> {
    config.validate()?;
    if samples.is_empty() {
        return Ok(0);
    }
    check_dim(am.dim(), samples.dim())?;
    let mut scorer = Scorer::new(am, config.similarity);
    let mut dots = Vec::with_capacity(am.num_classes());
    let mut mismatches = 0;
    for i in 0..samples.len() {
        let truth = checked_label(samples, i, am.num_classes())?;
        let predicted = scorer.predict(am, samples, i, &mut dots);
        if predicted == Some(truth) {
            continue;
        }
        mismatches += 1;
        if config.eta == 0.0 {
            continue;
        }
        let cosine = config.similarity == Similarity::Cosine;
        if let Some(wrong) = predicted {
            let dp = cosine.then(|| dots[wrong]);
            scorer.apply_update(am, samples, i, wrong, -config.eta, dp);
        }
        let dp = cosine.then(|| dots[truth]);
        scorer.apply_update(am, samples, i, truth, config.eta, dp);
    }
    Ok(mismatches)
}

/// Error-driven pass where predictions come from a fixed `reference` memory
/// and corrections accumulate into `target`.
///
/// Each sample's contribution depends only on the sample and `reference`, so
/// one sample changes at most two rows of `target`.
pub fn retrain_against<S: SampleSet + ?Sized>(
    reference: &AssociativeMemory,
    target: &mut AssociativeMemory,
    samples: &S,
    config: &TrainerConfig,
) -> Result<usize> {
    config.validate()?;
    reference.same_shape(target)?;
    if samples.is_empty() {
        return Ok(0);
    }
    check_dim(reference.dim(), samples.dim())?;
    let scorer = Scorer::new(reference, config.similarity);
    let mut dots = Vec::with_capacity(reference.num_classes());
    let mut mismatches = 0;
    for i in 0..samples.len() {
        let truth = checked_label(samples, i, reference.num_classes())?;
        let predicted = scorer.predict(reference, samples, i, &mut dots);
        if predicted == Some(truth) {
            continue;
        }
        mismatches += 1;
        if config.eta == 0.0 {
            continue;
        }
        if let Some(wrong) = predicted {
            samples.add_to(i, -config.eta, target.classes[wrong].values_mut());
        }
        samples.add_to(i, config.eta, target.classes[truth].values_mut());
    }
    Ok(mismatches)
}

/// Predict every sample against `am`. `None` entries mean the memory is
/// untrained.
pub(crate) fn predict_all<S: SampleSet + ?Sized>(
    am: &AssociativeMemory,
    samples: &S,
    similarity: Similarity,
) -> Vec<Option<usize>> {
    let scorer = Scorer::new(am, similarity);
    let mut dots = Vec::with_capacity(am.num_classes());
    (0..samples.len()).map(|i| scorer.predict(am, samples, i, &mut dots)).collect()
}

fn checked_label<S: SampleSet + ?Sized>(samples: &S, i: usize, classes: usize) -> Result<usize> {
    let label = samples.label(i);
    if label >= classes {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    Ok(label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hv(v: &[f64]) -> Hypervector {
        Hypervector::new(v.to_vec()).unwrap()
    }

    fn lab(v: &[f64], label: usize) -> LabeledHv {
        LabeledHv { hv: hv(v), label }
    }

    #[test]
    fn train_one_sample_per_class() {
        let s = [lab(&[1., -1., 1.], 0), lab(&[-1., -1., 1.], 1)];
        let am = train_am(&s[..], 3).unwrap();
        assert_eq!(am.class(0), &s[0].hv);
        assert_eq!(am.class(1), &s[1].hv);
        assert!(am.class(2).is_zero());
    }

    #[test]
    fn train_sums_duplicates_and_checks_labels() {
        let s = [lab(&[1., -1.], 0), lab(&[1., -1.], 0)];
        let am = train_am(&s[..], 1).unwrap();
        assert_eq!(am.class(0), &hv(&[2., -2.]));
        let bad = [lab(&[1., 1.], 2)];
        assert!(matches!(train_am(&bad[..], 2), Err(Error::LabelOutOfRange { label: 2, classes: 2 })));
    }

    #[test]
    fn infer_examples() {
        let q = hv(&[1., 2., -1.]);
        let am = AssociativeMemory::from_classes(vec![q.clone(), q.scaled(-1.0)]).unwrap();
        assert_eq!(infer(&q, &am, Similarity::Cosine).unwrap(), 0);

        // classes 1 and 2 (0-based) tie
        let am =
            AssociativeMemory::from_classes(vec![hv(&[-1., 0., 0.]), hv(&[1., 1., 0.]), hv(&[2., 2., 0.])]).unwrap();
        assert_eq!(infer(&hv(&[1., 1., 1.]), &am, Similarity::Cosine).unwrap(), 1);

        // q orthogonal to A_0, cos(q, A_1) = 0.3
        let q = hv(&[1., 0.]);
        let a1 = hv(&[0.3, (1.0f64 - 0.09).sqrt()]);
        let am = AssociativeMemory::from_classes(vec![hv(&[0., 1.]), a1]).unwrap();
        assert_eq!(infer(&q, &am, Similarity::Cosine).unwrap(), 1);
    }

    #[test]
    fn infer_skips_zero_prototypes_and_errors_when_untrained() {
        let am = AssociativeMemory::from_classes(vec![hv(&[0., 0.]), hv(&[-1., -1.])]).unwrap();
        assert_eq!(infer(&hv(&[1., 1.]), &am, Similarity::Cosine).unwrap(), 1);
        let am = AssociativeMemory::zeros(3, 2);
        assert!(matches!(infer(&hv(&[1., 1.]), &am, Similarity::Cosine), Err(Error::UntrainedMemory)));
    }

    #[test]
    fn hamming_similarity_counts_agreeing_signs() {
        let am = AssociativeMemory::from_classes(vec![hv(&[1., 1., -1., -1.]), hv(&[1., 1., 1., -0.5])]).unwrap();
        assert_eq!(infer(&hv(&[1., 1., 1., -1.]), &am, Similarity::Hamming).unwrap(), 1);
    }

    #[test]
    fn retrain_leaves_correct_memory_alone() {
        let s = [lab(&[1., 1., -1.], 0), lab(&[-1., 1., 1.], 1)];
        let mut am = train_am(&s[..], 2).unwrap();
        let before = am.clone();
        let m = retrain_pass(&mut am, &s[..], &TrainerConfig::default()).unwrap();
        assert_eq!(m, 0);
        assert_eq!(am, before);
    }

    #[test]
    fn retrain_moves_sample_between_classes() {
        let h = hv(&[1., 1., -1., 1.]);
        // predicted class 0, true class 1
        let mut am = AssociativeMemory::from_classes(vec![h.scaled(3.0), hv(&[1., -1., 1., -1.])]).unwrap();
        let s = [LabeledHv { hv: h.clone(), label: 1 }];
        let m = retrain_pass(&mut am, &s[..], &TrainerConfig::default()).unwrap();
        assert_eq!(m, 1);
        assert_eq!(am.class(0), &h.scaled(2.0));
        assert_eq!(am.class(1), &hv(&[2., 0., 0., 0.]));
    }

    #[test]
    fn zero_learning_rate_counts_but_does_not_update() {
        let h = hv(&[1., 1.]);
        let mut am = AssociativeMemory::from_classes(vec![h.clone(), h.scaled(-1.0)]).unwrap();
        let before = am.clone();
        let s = [LabeledHv { hv: h, label: 1 }];
        let cfg = TrainerConfig { eta: 0.0, ..Default::default() };
        assert_eq!(retrain_pass(&mut am, &s[..], &cfg).unwrap(), 1);
        assert_eq!(am, before);
    }

    #[test]
    fn retrain_against_predicts_with_reference() {
        let h = hv(&[1., 1.]);
        let reference = AssociativeMemory::from_classes(vec![h.clone(), h.scaled(-1.0)]).unwrap();
        let mut target = reference.clone();
        // both samples misclassified against the reference; online updates
        // would have corrected the second prediction
        let s = [lab(&[1., 1.], 1), lab(&[1., 1.], 1)];
        let m = retrain_against(&reference, &mut target, &s[..], &TrainerConfig::default()).unwrap();
        assert_eq!(m, 2);
        assert_eq!(target.class(0), &hv(&[-1., -1.]));
        assert_eq!(target.class(1), &hv(&[1., 1.]));
    }

    #[test]
    fn untrained_memory_retrain_adds_to_truth() {
        let mut am = AssociativeMemory::zeros(2, 2);
        let s = [lab(&[1., -1.], 1)];
        assert_eq!(retrain_pass(&mut am, &s[..], &TrainerConfig::default()).unwrap(), 1);
        assert_eq!(am.class(1), &hv(&[1., -1.]));
        assert!(am.class(0).is_zero());
    }

    fn bipolar_samples(max_n: usize) -> impl Strategy<Value = Vec<LabeledHv>> {
        prop::collection::vec((prop::collection::vec(prop::bool::ANY, 16), 0usize..4), 1..max_n).prop_map(|rows| {
            rows.into_iter()
                .map(|(bits, label)| LabeledHv {
                    hv: Hypervector(bits.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect()),
                    label,
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn train_is_permutation_invariant(samples in bipolar_samples(20), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = samples.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(train_am(&samples[..], 4).unwrap(), train_am(&shuffled[..], 4).unwrap());
        }

        #[test]
        fn cosine_inference_ignores_positive_rescaling(
            samples in bipolar_samples(20),
            scale in 0.01f64..100.0,
            query in prop::collection::vec(-3.0f64..3.0, 16),
        ) {
            let am = train_am(&samples[..], 4).unwrap();
            prop_assume!(!am.is_untrained());
            let scaled = AssociativeMemory::from_classes(
                am.classes().iter().map(|c| c.scaled(scale)).collect()).unwrap();
            let q = Hypervector(query);
            prop_assert_eq!(
                infer(&q, &am, Similarity::Cosine).unwrap(),
                infer(&q, &scaled, Similarity::Cosine).unwrap()
            );
        }

        #[test]
        fn retrain_with_all_correct_predictions_is_identity(samples in bipolar_samples(12)) {
            let am = train_am(&samples[..], 4).unwrap();
            let preds = predict_all(&am, &samples[..], Similarity::Cosine);
            let correct: Vec<LabeledHv> = samples
                .iter()
                .zip(&preds)
                .filter(|(s, p)| **p == Some(s.label))
                .map(|(s, _)| s.clone())
                .collect();
            let mut updated = am.clone();
            let m = retrain_pass(&mut updated, &correct[..], &TrainerConfig::default()).unwrap();
            prop_assert_eq!(m, 0);
            prop_assert_eq!(updated, am);
        }
    }
}
