use std::fmt::Write as _;

use crate::data_model::{FeatureDataset, LabelDim, SplitIndices};
use crate::error::{bail, Result};
use crate::net::layers::DropoutMode;
use crate::net::model::{argmax, batch_gradients, predict, sample_loss};
use crate::net::params::{init_params, ModelConfig, ModelParams};
use crate::par::Parallelism;
use crate::rng::{derive_seed, Prng};
use crate::train::adam::{adam_step, clip_global_norm, AdamHyper, AdamState};
use crate::train::checkpoint::Checkpoint;
use crate::train::metrics::Metrics;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub init_seed: u64,
    pub shuffle_seed: u64,
    pub dropout_seed: u64,
    pub label_dim: LabelDim,
    /// Stop after this many evaluations without a new best test accuracy.
    pub patience: Option<usize>,
    pub eval_every: usize,
    /// Keep the last epoch instead of the best-by-test-accuracy one.
    pub final_epoch: bool,
    pub clip_norm: Option<f64>,
    pub adam: AdamHyper,
    pub parallelism: Parallelism,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            epochs: 50,
            init_seed: 1,
            shuffle_seed: 2,
            dropout_seed: 3,
            label_dim: LabelDim::Valence,
            patience: None,
            eval_every: 1,
            final_epoch: false,
            clip_norm: None,
            adam: AdamHyper::default(),
            parallelism: Parallelism::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.eval_every == 0 {
            bail!(Config, "batch_size, epochs and eval_every must be >= 1");
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                bail!(Config, "clip_norm must be > 0, got {c}");
            }
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    /// Accuracy of the training-mode (dropout) predictions.
    pub accuracy: f64,
}

fn check_shapes(params: &ModelParams<f32>, data: &FeatureDataset) -> Result<()> {
    let c = &params.config;
    if c.seq_len != data.seq_len || c.input_dim != data.input_dim {
        bail!(
            Shape,
            "model expects ({}, {}) samples, features are ({}, {})",
            c.seq_len,
            c.input_dim,
            data.seq_len,
            data.input_dim
        );
    }
    Ok(())
}

/// One pass over the training indices in an epoch-seeded shuffled order,
/// including the final short batch. Epoch numbers start at 1.
pub fn train_epoch(
    params: &mut ModelParams<f32>,
    data: &FeatureDataset,
    train: &[usize],
    cfg: &TrainConfig,
    adam: &mut AdamState<f32>,
    epoch: usize,
) -> Result<EpochStats> {
    if train.is_empty() {
        bail!(TooFewSamples, "training split is empty");
    }
    check_shapes(params, data)?;
    let mut order = train.to_vec();
    Prng::derived(cfg.shuffle_seed, &[epoch as u64]).shuffle(&mut order);
    let mask_seed = derive_seed(cfg.dropout_seed, &[epoch as u64]);
    let mut loss = 0.0;
    let mut correct = 0;
    for batch in order.chunks(cfg.batch_size) {
        let inputs: Vec<&[f32]> = batch.iter().map(|&i| data.sample(i)).collect();
        let targets: Vec<usize> = batch.iter().map(|&i| data.target(i)).collect();
        let keys: Vec<u64> = batch.iter().map(|&i| i as u64).collect();
        let mut out = batch_gradients(params, &inputs, &targets, &keys, DropoutMode::Train, mask_seed, cfg.parallelism)?;
        loss += out.loss_sum;
        correct += out.correct;
        if let Some(c) = cfg.clip_norm {
            clip_global_norm(&mut out.grads, c);
        }
        adam_step(&mut params.values, &out.grads, adam)?;
    }
    if !loss.is_finite() {
        bail!(Numeric, "training loss diverged in epoch {epoch}");
    }
    Ok(EpochStats {
        mean_loss: loss / train.len() as f64,
        accuracy: correct as f64 / train.len() as f64,
    })
}

/// Inference-mode predictions (argmax, ties to the lowest class) and the
/// summed loss over `indices`.
pub fn predict_classes(
    params: &ModelParams<f32>,
    data: &FeatureDataset,
    indices: &[usize],
    par: Parallelism,
) -> Result<(Vec<usize>, f64)> {
    check_shapes(params, data)?;
    let mut preds = Vec::with_capacity(indices.len());
    let mut loss = 0.0;
    for chunk in indices.chunks(1024) {
        let inputs: Vec<&[f32]> = chunk.iter().map(|&i| data.sample(i)).collect();
        for (probs, &i) in predict(params, &inputs, par)?.iter().zip(chunk) {
            preds.push(argmax(probs));
            loss += sample_loss(probs, data.target(i));
        }
    }
    Ok((preds, loss))
}

pub fn evaluate(params: &ModelParams<f32>, data: &FeatureDataset, indices: &[usize], par: Parallelism) -> Result<Metrics> {
    if indices.is_empty() {
        bail!(TooFewSamples, "evaluation set is empty");
    }
    let (preds, loss) = predict_classes(params, data, indices, par)?;
    let targets: Vec<usize> = indices.iter().map(|&i| data.target(i)).collect();
    Metrics::from_predictions(&targets, &preds, params.config.n_classes, loss / indices.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub split: &'static str,
    pub loss: f64,
    pub accuracy: f64,
}

/// `epoch,split,loss,accuracy` rows with a header line.
pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut s = String::from("epoch,split,loss,accuracy\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.epoch, r.split, r.loss, r.accuracy);
    }
    s
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Best-by-test-accuracy parameters, or the last epoch's with
    /// `final_epoch`.
    pub checkpoint: Checkpoint,
    /// Test metrics of the kept parameters.
    pub test_metrics: Metrics,
    pub history: Vec<HistoryRow>,
    pub epochs_run: usize,
}

/// Trains a fresh model on `split.train`, evaluating on `split.test` every
/// `eval_every` epochs and after the last one.
pub fn fit(
    data: &FeatureDataset,
    split: &SplitIndices,
    model: &ModelConfig,
    cfg: &TrainConfig,
    progress: &mut dyn FnMut(&HistoryRow),
) -> Result<FitOutcome> {
    cfg.validate()?;
    data.validate()?;
    if split.train.is_empty() || split.test.is_empty() {
        bail!(TooFewSamples, "need non-empty train and test splits");
    }
    if let Some(&i) = split.train.iter().chain(&split.test).find(|&&i| i >= data.n_samples) {
        bail!(Shape, "split index {i} out of range for {} samples", data.n_samples);
    }
    let data_view;
    let data = if data.label_dim == cfg.label_dim {
        data
    } else {
        data_view = data.clone().with_label_dim(cfg.label_dim);
        &data_view
    };
    let mut params = init_params::<f32>(model, cfg.init_seed)?;
    check_shapes(&params, data)?;
    let mut adam = AdamState::new(params.len(), cfg.adam);
    let mut history = Vec::new();
    let mut best: Option<(Checkpoint, Metrics)> = None;
    let mut since_best = 0;
    let mut epochs_run = 0;
    for epoch in 1..=cfg.epochs {
        let stats = train_epoch(&mut params, data, &split.train, cfg, &mut adam, epoch)?;
        epochs_run = epoch;
        let row = HistoryRow {
            epoch,
            split: "train",
            loss: stats.mean_loss,
            accuracy: stats.accuracy,
        };
        progress(&row);
        history.push(row);
        if epoch % cfg.eval_every != 0 && epoch != cfg.epochs {
            continue;
        }
        let m = evaluate(&params, data, &split.test, cfg.parallelism)?;
        let row = HistoryRow {
            epoch,
            split: "test",
            loss: m.mean_loss,
            accuracy: m.accuracy,
        };
        progress(&row);
        history.push(row);
        let improved = best.as_ref().is_none_or(|(ck, _)| m.accuracy > ck.test_accuracy);
        if improved || cfg.final_epoch {
            let ck = Checkpoint {
                params: params.clone(),
                label_dim: cfg.label_dim,
                epoch,
                test_accuracy: m.accuracy,
                adam: Some(adam.clone()),
            };
            best = Some((ck, m));
        }
        since_best = if improved { 0 } else { since_best + 1 };
        if cfg.patience.is_some_and(|p| since_best >= p) {
            break;
        }
    }
    if cfg.final_epoch && best.as_ref().map(|(ck, _)| ck.epoch) != Some(epochs_run) {
        let m = evaluate(&params, data, &split.test, cfg.parallelism)?;
        best = Some((
            Checkpoint {
                params,
                label_dim: cfg.label_dim,
                epoch: epochs_run,
                test_accuracy: m.accuracy,
                adam: Some(adam),
            },
            m,
        ));
    }
    let (checkpoint, test_metrics) = best.expect("at least one evaluation ran");
    Ok(FitOutcome {
        checkpoint,
        test_metrics,
        history,
        epochs_run,
    })
}
