use crate::data_model::{FeatureDataset, LabelDim, N_LABEL_DIMS};
use crate::dsp::features::{RawFeatures, SequenceMode};
use crate::error::{bail, Result};

/// Turns per-window features into network samples. `trial_classes[t]` holds
/// the class index of every label dimension for trial `t`.
pub fn to_sequences(
    raw: &RawFeatures,
    trial_classes: &[[u8; N_LABEL_DIMS]],
    mode: SequenceMode,
    label_dim: LabelDim,
) -> Result<FeatureDataset> {
    if trial_classes.len() != raw.n_trials {
        bail!(
            Shape,
            "{} trial labels for {} trials",
            trial_classes.len(),
            raw.n_trials
        );
    }
    let ds = match mode {
        SequenceMode::FeatureAsSteps => {
            let n = raw.n_trials * raw.n_windows;
            FeatureDataset {
                n_samples: n,
                seq_len: raw.dim,
                input_dim: 1,
                features: raw.values.clone(),
                class_labels: raw
                    .trial_index
                    .iter()
                    .map(|&t| trial_classes[t as usize])
                    .collect(),
                label_dim,
                trial_ids: raw.trial_index.clone(),
                feature_stats: None,
            }
        }
        SequenceMode::WindowAsSteps(w) => {
            if w == 0 || w > raw.n_windows {
                bail!(
                    InvalidArg,
                    "window_as_steps({w}) needs 1..={} windows per trial",
                    raw.n_windows
                );
            }
            let per_trial = raw.n_windows / w;
            let mut features = Vec::with_capacity(raw.n_trials * per_trial * w * raw.dim);
            let mut class_labels = Vec::new();
            let mut trial_ids = Vec::new();
            for t in 0..raw.n_trials {
                for s in 0..per_trial {
                    for k in 0..w {
                        features.extend_from_slice(raw.window(t, s * w + k));
                    }
                    class_labels.push(trial_classes[t]);
                    trial_ids.push(t as u32);
                }
            }
            FeatureDataset {
                n_samples: class_labels.len(),
                seq_len: w,
                input_dim: raw.dim,
                features,
                class_labels,
                label_dim,
                trial_ids,
                feature_stats: None,
            }
        }
    };
    ds.validate()?;
    Ok(ds)
}
