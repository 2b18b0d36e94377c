//! Glue between the stages: pooled recordings to a normalized feature set,
//! and the split shared by the `features` and `train` commands.

use crate::data_model::{rating_to_class, split_by_group, split_indices, FeatureDataset, LabelDim, SplitIndices, SplitUnit, TrialSet, N_LABEL_DIMS};
use crate::dsp::features::extract_features;
use crate::dsp::norm::{zscore_apply_in_place, zscore_fit};
use crate::dsp::sequences::to_sequences;
use crate::error::{bail, Result};
use crate::runconfig::RunConfig;

/// Concatenates trial sets that share channel count, length and rate.
pub fn pool_trial_sets(sets: Vec<TrialSet>) -> Result<TrialSet> {
    let mut iter = sets.into_iter();
    let mut pooled = match iter.next() {
        Some(ts) => ts,
        None => bail!(InvalidArg, "no recordings given"),
    };
    for ts in iter {
        if ts.n_channels != pooled.n_channels || ts.n_samples != pooled.n_samples || ts.sample_rate_hz != pooled.sample_rate_hz {
            bail!(
                Shape,
                "cannot pool ({} ch, {} samples, {} Hz) with ({} ch, {} samples, {} Hz)",
                ts.n_channels,
                ts.n_samples,
                ts.sample_rate_hz,
                pooled.n_channels,
                pooled.n_samples,
                pooled.sample_rate_hz
            );
        }
        pooled.n_trials += ts.n_trials;
        pooled.data.extend_from_slice(&ts.data);
        pooled.labels.extend_from_slice(&ts.labels);
    }
    Ok(pooled)
}

/// Class index (0..9) of every label dimension, per trial.
pub fn trial_classes(ts: &TrialSet) -> Result<Vec<[u8; N_LABEL_DIMS]>> {
    (0..ts.n_trials)
        .map(|t| {
            let mut row = [0u8; N_LABEL_DIMS];
            for d in LabelDim::ALL {
                row[d.index()] = rating_to_class(ts.label(t, d) as f64)? as u8;
            }
            Ok(row)
        })
        .collect()
}

/// The train/test split a run config implies for a dataset.
pub fn make_split(ds: &FeatureDataset, cfg: &RunConfig) -> Result<SplitIndices> {
    match cfg.split_unit {
        SplitUnit::Window => split_indices(ds.n_samples, cfg.train_fraction, cfg.split_seed),
        SplitUnit::Trial => split_by_group(&ds.trial_ids, cfg.train_fraction, cfg.split_seed),
    }
}

/// Band-power features, sequences, and z-scoring with statistics fitted
/// on the training split only.
pub fn prepare_features(ts: &TrialSet, cfg: &RunConfig) -> Result<(FeatureDataset, SplitIndices)> {
    let raw = extract_features(ts, &cfg.channels, &cfg.bands, &cfg.window, &cfg.feature_options())?;
    let mut ds = to_sequences(&raw, &trial_classes(ts)?, cfg.sequence_mode, cfg.train.label_dim)?;
    let split = make_split(&ds, cfg)?;
    let stats = zscore_fit(&ds.features, ds.sample_len(), &split.train)?;
    zscore_apply_in_place(&mut ds.features, &stats)?;
    ds.feature_stats = Some(stats);
    ds.validate()?;
    Ok((ds, split))
}
