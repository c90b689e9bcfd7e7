//! Federated HDC training with optional differential privacy.
//!
//! Round 1: every user bundles its (clipped) encoded samples per class into
//! a local memory. Later rounds: every user copies the broadcast global
//! memory and makes one error-driven pass over its samples, each prediction
//! using the copy as corrected so far. The result is uploaded with fresh
//! Gaussian noise and the server takes the element-wise mean. All users take
//! part in every round.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{partition, Dataset, Partition, PartitionScheme};
use crate::hdc::{
    predict_all, retrain_pass, train_am, AssociativeMemory, EncodedBatch, ItemMemory, SampleSet, Similarity, Subset,
    TrainerConfig,
};
use crate::privacy::{add_noise_in_place, noise_rng, noise_schedule, NoiseSchedule, PrivacySpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub dim: usize,
    pub levels: usize,
    /// Seed of the shared item memory.
    pub seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { dim: 10_000, levels: 16, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FederationConfig {
    pub users: usize,
    pub max_rounds: usize,
    /// Stop after the first round whose accuracy reaches this; `None` runs
    /// all rounds.
    pub target_accuracy: Option<f64>,
    pub privacy: Option<PrivacySpec>,
    pub trainer: TrainerConfig,
    pub encoder: EncoderConfig,
    pub partition: PartitionScheme,
    /// Drives the data partition and the noise streams.
    pub seed: u64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            users: 50,
            max_rounds: 20,
            target_accuracy: None,
            privacy: None,
            trainer: TrainerConfig::default(),
            encoder: EncoderConfig::default(),
            partition: PartitionScheme::Iid,
            seed: 0,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.max_rounds == 0 {
            return Err(Error::invalid("users and max_rounds must be >= 1"));
        }
        if let Some(t) = self.target_accuracy {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid(format!("target accuracy must lie in [0, 1], got {t}")));
            }
        }
        if let Some(p) = &self.privacy {
            p.validate()?;
            if p.rounds < self.max_rounds {
                return Err(Error::invalid(format!(
                    "privacy budget planned for {} rounds but max_rounds is {}",
                    p.rounds, self.max_rounds
                )));
            }
        }
        if self.encoder.dim == 0 || self.encoder.levels < 2 {
            return Err(Error::invalid("encoder needs dim >= 1 and >= 2 levels"));
        }
        self.trainer.validate()
    }

    fn kappa(&self) -> Option<f64> {
        self.privacy.map(|p| p.kappa)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    /// Test accuracy of the global memory after aggregation.
    pub accuracy: f64,
    /// Misclassified local samples per user (round 1 has none).
    pub mismatches: Vec<usize>,
    pub rho_spent: f64,
    /// Mean over users of mismatches / local sample count.
    pub mean_error_rate: f64,
}

#[derive(Clone, Debug)]
pub struct TrainingRun {
    pub logs: Vec<RoundLog>,
    pub global: AssociativeMemory,
    /// First round whose accuracy met the target.
    pub reached_round: Option<usize>,
}

/// Encoded train and test sets sharing one item memory.
#[derive(Clone, Debug)]
pub struct EncodedData {
    pub train: EncodedBatch,
    pub test: EncodedBatch,
    pub num_classes: usize,
    pub encoder: EncoderConfig,
}

pub fn encode_data(encoder: &EncoderConfig, train: &Dataset, test: &Dataset) -> Result<EncodedData> {
    if train.pixels_per_sample() != test.pixels_per_sample() || train.num_classes != test.num_classes {
        return Err(Error::invalid("train and test sets differ in shape or class count"));
    }
    let im = ItemMemory::generate(encoder.seed, train.pixels_per_sample(), encoder.levels, encoder.dim)?;
    Ok(EncodedData {
        train: EncodedBatch::encode(&im, &train.samples, None)?,
        test: EncodedBatch::encode(&im, &test.samples, None)?,
        num_classes: train.num_classes,
        encoder: *encoder,
    })
}

/// Element-wise mean, accumulated in user order.
pub fn aggregate(local: &[AssociativeMemory]) -> Result<AssociativeMemory> {
    let (first, rest) = local.split_first().ok_or(Error::EmptyInput("no local memories"))?;
    let mut sum = first.clone();
    for am in rest {
        sum.same_shape(am)?;
        for n in 0..sum.num_classes() {
            for (x, y) in sum.class_mut(n).values_mut().iter_mut().zip(am.class(n).values()) {
                *x += y;
            }
        }
    }
    let inv = 1.0 / local.len() as f64;
    for n in 0..sum.num_classes() {
        for x in sum.class_mut(n).values_mut() {
            *x *= inv;
        }
    }
    Ok(sum)
}

/// Fraction of `test` classified correctly. An all-zero memory predicts
/// nothing and scores chance level, `1 / N`.
pub fn evaluate<S: SampleSet + ?Sized>(am: &AssociativeMemory, test: &S, similarity: Similarity) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyInput("empty test set"));
    }
    crate::hdc::check_dim(am.dim(), test.dim())?;
    if am.is_untrained() {
        return Ok(1.0 / am.num_classes() as f64);
    }
    let correct =
        predict_all(am, test, similarity).into_iter().enumerate().filter(|&(i, p)| p == Some(test.label(i))).count();
    Ok(correct as f64 / test.len() as f64)
}

/// Encode both sets and train. See [`run_encoded`].
pub fn run_training(config: &FederationConfig, train: &Dataset, test: &Dataset) -> Result<TrainingRun> {
    config.validate()?;
    let mut data = encode_data(&config.encoder, train, test)?;
    run_encoded(config, train, &mut data)
}

/// Train on pre-encoded data; `train` supplies the labels used for
/// partitioning and must be the set `data.train` was encoded from.
pub fn run_encoded(config: &FederationConfig, train: &Dataset, data: &mut EncodedData) -> Result<TrainingRun> {
    config.validate()?;
    if data.encoder != config.encoder {
        return Err(Error::invalid("encoded data was produced with a different encoder"));
    }
    if train.len() != data.train.len() {
        return Err(Error::invalid("dataset and encoded batch differ in length"));
    }
    data.train.reclip(config.kappa())?;
    let parts = partition(train, config.users, config.partition, config.seed)?;
    let schedule = config.privacy.map(|p| noise_schedule(&p)).transpose()?;
    let num_classes = data.num_classes;

    let mut global = AssociativeMemory::zeros(num_classes, data.train.dim());
    let mut logs = Vec::new();
    let mut reached_round = None;
    for round in 1..=config.max_rounds {
        let (locals, mismatches): (Vec<_>, Vec<_>) =
            local_round(config, &parts, &data.train, &global, num_classes, round)?.into_iter().unzip();
        global = upload_and_aggregate(config, locals, round, schedule.as_ref())?;
        let accuracy = evaluate(&global, &data.test, config.trainer.similarity)?;
        let mean_error_rate = mismatches
            .iter()
            .zip(&parts.assignments)
            .map(|(&m, idx)| if idx.is_empty() { 0.0 } else { m as f64 / idx.len() as f64 })
            .sum::<f64>()
            / parts.num_users() as f64;
        logs.push(RoundLog {
            round,
            accuracy,
            mismatches,
            rho_spent: schedule.as_ref().map_or(0.0, |s| s.rho_spent(round)),
            mean_error_rate,
        });
        if config.target_accuracy.is_some_and(|t| accuracy >= t) {
            reached_round = Some(round);
            break;
        }
    }
    Ok(TrainingRun { logs, global, reached_round })
}

/// Every user's un-noised local memory for `round`, with its mismatch count.
fn local_round(
    config: &FederationConfig,
    parts: &Partition,
    train: &EncodedBatch,
    global: &AssociativeMemory,
    num_classes: usize,
    round: usize,
) -> Result<Vec<(AssociativeMemory, usize)>> {
    (0..parts.num_users())
        .into_par_iter()
        .map(|i| {
            let view = Subset::new(train, parts.user(i))?;
            if round == 1 {
                let am = if view.is_empty() {
                    AssociativeMemory::zeros(num_classes, train.dim())
                } else {
                    train_am(&view, num_classes)?
                };
                return Ok((am, 0));
            }
            let mut local = global.clone();
            let mismatches = retrain_pass(&mut local, &view, &config.trainer)?;
            Ok((local, mismatches))
        })
        .collect()
}

/// Noise every local memory with its own stream and average in user order.
fn upload_and_aggregate(
    config: &FederationConfig,
    mut locals: Vec<AssociativeMemory>,
    round: usize,
    schedule: Option<&NoiseSchedule>,
) -> Result<AssociativeMemory> {
    if let Some(s) = schedule {
        // retraining moves a record by up to eta * sqrt(2) * kappa, so the
        // noise scales with eta to keep the per-round rho
        let sigma = if round > 1 { config.trainer.eta * s.sigma(round) } else { s.sigma(round) };
        locals
            .par_iter_mut()
            .enumerate()
            .try_for_each(|(i, am)| add_noise_in_place(am, sigma, &mut noise_rng(config.seed, i, round)))?;
    }
    aggregate(&locals)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundsToAccuracy {
    /// First round reaching the target per seed; `max_rounds + 1` when the
    /// target was never reached.
    pub rounds: Vec<usize>,
    pub converged: Vec<bool>,
    pub mean: f64,
}

/// Rounds needed to hit `config.target_accuracy`, once per seed. The seed
/// replaces `config.seed`; the encoder is shared so the data is encoded
/// once.
pub fn rounds_to_accuracy(
    config: &FederationConfig,
    train: &Dataset,
    data: &mut EncodedData,
    seeds: &[u64],
) -> Result<RoundsToAccuracy> {
    if config.target_accuracy.is_none() {
        return Err(Error::invalid("rounds_to_accuracy needs a target accuracy"));
    }
    if seeds.is_empty() {
        return Err(Error::EmptyInput("no seeds"));
    }
    let mut rounds = Vec::with_capacity(seeds.len());
    let mut converged = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let run = run_encoded(&FederationConfig { seed, ..config.clone() }, train, data)?;
        rounds.push(run.reached_round.unwrap_or(config.max_rounds + 1));
        converged.push(run.reached_round.is_some());
    }
    let mean = rounds.iter().sum::<usize>() as f64 / rounds.len() as f64;
    Ok(RoundsToAccuracy { rounds, converged, mean })
}
