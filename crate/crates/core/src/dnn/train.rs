use ndarray::{Array2, Axis};
use rand::Rng;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::loss::{features_loss, features_loss_and_gradients, stack_raw, TrainingSample};
use super::model::{Mlp, Normalizer};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::geometry::sample_rng;
use crate::rate::PowerAllocation;
use crate::solver::SinrCoefficients;

/// Training and validation losses recorded at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRecord {
    pub iteration: u64,
    /// Mean mini-batch loss since the previous record (at iteration 0, the
    /// loss on the first `min(n, 1000)` training samples).
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingHistory {
    pub records: Vec<HistoryRecord>,
    pub best_iteration: u64,
}

impl TrainingHistory {
    pub fn best_validation_loss(&self) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.iteration == self.best_iteration)
            .map(|r| r.validation_loss)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss seen.
    pub model: Mlp,
    pub history: TrainingHistory,
}

struct Split<'a> {
    features: Array2<f64>,
    coeffs: Vec<&'a SinrCoefficients>,
}

impl<'a> Split<'a> {
    fn new(samples: &'a [TrainingSample], normalizer: &Normalizer) -> Result<Self> {
        let raw = stack_raw(samples, normalizer.dim())?;
        Ok(Split {
            features: normalizer.apply(raw.view()),
            coeffs: samples.iter().map(|s| &s.coeffs).collect(),
        })
    }

    fn loss(&self, model: &Mlp) -> f64 {
        features_loss(model, self.features.view(), &self.coeffs)
    }
}

/// Mini-batch Adam on the negative minimum rate.
///
/// The normalizer is fitted on `train`; weights come from `cfg.seed`
/// (stream 0) and batches are drawn uniformly with replacement from
/// stream 1 of the same seed.
pub fn train(
    train: &[TrainingSample],
    validation: &[TrainingSample],
    num_aps: usize,
    num_users: usize,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Config("training and validation sets must be non-empty".into()));
    }
    let dim = num_aps * num_users;
    let raw = stack_raw(train, dim)?;
    let mut model = Mlp::build_with(num_aps, num_users, cfg.seed, cfg.input_transform);
    model.normalizer = Normalizer::fit(raw.view(), cfg.input_transform)?;
    drop(raw);
    train_from(model, train, validation, cfg)
}

/// Continues training an existing model (its normalizer is kept).
pub fn train_from(
    mut model: Mlp,
    train: &[TrainingSample],
    validation: &[TrainingSample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let train_split = Split::new(train, &model.normalizer)?;
    let val_split = Split::new(validation, &model.normalizer)?;
    let adam = AdamConfig::from(cfg);
    let mut state = AdamState::new(&model);
    let mut rng = sample_rng(cfg.seed, 1);

    let probe = train.len().min(1000);
    let probe_loss = features_loss(
        &model,
        train_split.features.slice(ndarray::s![..probe, ..]),
        &train_split.coeffs[..probe],
    );
    let mut best = model.clone();
    let mut best_loss = val_split.loss(&model);
    let mut history = TrainingHistory {
        records: vec![HistoryRecord {
            iteration: 0,
            train_loss: probe_loss,
            validation_loss: best_loss,
        }],
        best_iteration: 0,
    };

    let mut window = (0.0, 0usize);
    let mut indices = vec![0usize; cfg.batch_size];
    for iteration in 1..=cfg.iterations {
        indices
            .iter_mut()
            .for_each(|i| *i = rng.random_range(0..train.len()));
        let features = train_split.features.select(Axis(0), &indices);
        let coeffs: Vec<&SinrCoefficients> = indices.iter().map(|&i| train_split.coeffs[i]).collect();
        let (loss, grads) = features_loss_and_gradients(&model, features, &coeffs);
        adam_step(&mut model, &grads, &mut state, cfg.learning_rate, adam)?;
        window.0 += loss;
        window.1 += 1;

        if iteration % cfg.validation_every == 0 || iteration == cfg.iterations {
            let validation_loss = val_split.loss(&model);
            history.records.push(HistoryRecord {
                iteration: iteration as u64,
                train_loss: window.0 / window.1 as f64,
                validation_loss,
            });
            window = (0.0, 0);
            if validation_loss < best_loss {
                best_loss = validation_loss;
                best = model.clone();
                history.best_iteration = iteration as u64;
            }
        }
    }
    Ok(TrainOutcome {
        model: best,
        history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneOutcome {
    /// Best allocation seen, including the untouched model's output.
    pub q: PowerAllocation,
    pub min_rate: f64,
    pub initial_min_rate: f64,
    /// Gradient steps taken before `q` was produced (0 = offline output).
    pub best_iteration: usize,
}

/// Per-sample continuation of training on a private copy of `model`.
///
/// Runs `iterations` Adam steps on the single-sample loss and keeps the
/// allocation with the highest minimum rate over all `iterations + 1`
/// evaluated parameter sets, so the result never falls below the offline
/// model's.
pub fn online_finetune(
    model: &Mlp,
    sample: &TrainingSample,
    iterations: usize,
    lr: f64,
    adam: AdamConfig,
) -> Result<FinetuneOutcome> {
    let raw = stack_raw(std::iter::once(sample), model.input_dim())?;
    let features = model.normalizer.apply(raw.view());
    let coeffs = [&sample.coeffs];
    let mut local = model.clone();
    let mut state = AdamState::new(&local);

    // the offline candidate goes through `forward` so it matches plain
    // inference bit for bit
    let offline = model.forward(&sample.beta)?.into_inner();
    let initial = sample.coeffs.min_rate(&offline).value;
    let mut best = (initial, offline, 0);
    for iteration in 0..=iterations {
        let cache = local.forward_cached(features.clone());
        let (loss, d_out) = super::loss::output_loss_gradient(cache.output(), &coeffs);
        let rate = -loss;
        if rate > best.0 {
            best = (rate, cache.output().row(0).to_vec(), iteration);
        }
        if iteration < iterations {
            let grads = local.backward(&cache, d_out);
            adam_step(&mut local, &grads, &mut state, lr, adam)?;
        }
    }
    let (min_rate, q, best_iteration) = best;
    Ok(FinetuneOutcome {
        q: PowerAllocation::new(q)?,
        min_rate,
        initial_min_rate: initial,
        best_iteration,
    })
}
