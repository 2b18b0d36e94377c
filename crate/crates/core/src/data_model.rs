//! Containers shared by every stage, label encoding, and train/test splits.

use std::fmt;
use std::str::FromStr;

use crate::error::{bail, Error, Result};
use crate::rng::Prng;

pub const N_CLASSES: usize = 9;
pub const N_LABEL_DIMS: usize = 4;

/// Raw EEG: `data` is laid out (trial, channel, sample), row-major, and
/// `labels` is (trial, dimension) with dimensions in [`LabelDim`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub n_trials: usize,
    pub n_channels: usize,
    pub n_samples: usize,
    pub sample_rate_hz: f32,
    pub data: Vec<f32>,
    pub labels: Vec<f32>,
}

impl TrialSet {
    pub fn new(
        n_trials: usize,
        n_channels: usize,
        n_samples: usize,
        sample_rate_hz: f32,
        data: Vec<f32>,
        labels: Vec<f32>,
    ) -> Result<Self> {
        let ts = TrialSet {
            n_trials,
            n_channels,
            n_samples,
            sample_rate_hz,
            data,
            labels,
        };
        ts.validate()?;
        Ok(ts)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 || self.n_channels == 0 || self.n_samples == 0 {
            bail!(Shape, "trial set dimensions must be non-zero");
        }
        let expected = self
            .n_trials
            .checked_mul(self.n_channels)
            .and_then(|x| x.checked_mul(self.n_samples))
            .ok_or_else(|| Error::Shape("trial set dimensions overflow".into()))?;
        if self.data.len() != expected {
            bail!(
                Shape,
                "data has {} values, expected {}",
                self.data.len(),
                expected
            );
        }
        if self.labels.len() != self.n_trials * N_LABEL_DIMS {
            bail!(
                Shape,
                "labels have {} values, expected {}",
                self.labels.len(),
                self.n_trials * N_LABEL_DIMS
            );
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            bail!(InvalidArg, "sample rate must be positive, got {}", self.sample_rate_hz);
        }
        if let Some((i, v)) = self
            .labels
            .iter()
            .enumerate()
            .find(|(_, v)| !(1.0..=9.0).contains(*v))
        {
            bail!(
                InvalidLabel,
                "label {} of trial {} is {} (outside [1, 9])",
                i % N_LABEL_DIMS,
                i / N_LABEL_DIMS,
                v
            );
        }
        Ok(())
    }

    pub fn channel(&self, trial: usize, channel: usize) -> &[f32] {
        let start = (trial * self.n_channels + channel) * self.n_samples;
        &self.data[start..start + self.n_samples]
    }

    pub fn label(&self, trial: usize, dim: LabelDim) -> f32 {
        self.labels[trial * N_LABEL_DIMS + dim.index()]
    }
}

pub fn select_target(ts: &TrialSet, dim: LabelDim) -> Vec<f32> {
    (0..ts.n_trials).map(|t| ts.label(t, dim)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelDim {
    Valence = 0,
    Arousal = 1,
    Dominance = 2,
    Liking = 3,
}

impl LabelDim {
    pub const ALL: [LabelDim; 4] = [
        LabelDim::Valence,
        LabelDim::Arousal,
        LabelDim::Dominance,
        LabelDim::Liking,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            LabelDim::Valence => "valence",
            LabelDim::Arousal => "arousal",
            LabelDim::Dominance => "dominance",
            LabelDim::Liking => "liking",
        }
    }
}

impl fmt::Display for LabelDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LabelDim {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valence" => Ok(LabelDim::Valence),
            "arousal" => Ok(LabelDim::Arousal),
            "dominance" => Ok(LabelDim::Dominance),
            "liking" => Ok(LabelDim::Liking),
            other => Err(Error::Config(format!(
                "unknown label dimension {other:?} (expected valence, arousal, dominance or liking)"
            ))),
        }
    }
}

/// One-hot class vector over the nine rating classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassTarget(pub [f32; N_CLASSES]);

impl ClassTarget {
    pub fn from_class(class: usize) -> Result<Self> {
        if class >= N_CLASSES {
            bail!(InvalidLabel, "class index {class} out of range");
        }
        let mut v = [0.0; N_CLASSES];
        v[class] = 1.0;
        Ok(ClassTarget(v))
    }

    /// Zero-based class index, or an error if the vector is not one-hot.
    pub fn class(&self) -> Result<usize> {
        let mut hot = None;
        for (i, &v) in self.0.iter().enumerate() {
            if v == 1.0 {
                if hot.is_some() {
                    bail!(InvalidLabel, "more than one hot entry");
                }
                hot = Some(i);
            } else if v != 0.0 {
                bail!(InvalidLabel, "entry {i} is {v}, expected 0 or 1");
            }
        }
        hot.ok_or_else(|| Error::InvalidLabel("no hot entry".into()))
    }
}

/// Rating to zero-based class: round half away from zero, clamp to 1..=9.
pub fn rating_to_class(rating: f64) -> Result<usize> {
    if !rating.is_finite() {
        bail!(InvalidLabel, "rating {rating} is not finite");
    }
    // f64::round rounds half away from zero.
    Ok(rating.round().clamp(1.0, 9.0) as usize - 1)
}

pub fn one_hot_encode(rating: f64) -> Result<ClassTarget> {
    ClassTarget::from_class(rating_to_class(rating)?)
}

pub fn one_hot_decode(target: &ClassTarget) -> Result<u8> {
    Ok(target.class()? as u8 + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitUnit {
    Window,
    Trial,
}

impl FromStr for SplitUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "window" => Ok(SplitUnit::Window),
            "trial" => Ok(SplitUnit::Trial),
            other => Err(Error::Config(format!(
                "split_unit must be window or trial, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for SplitUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitUnit::Window => "window",
            SplitUnit::Trial => "trial",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

fn check_fraction(train_fraction: f64) -> Result<()> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        bail!(InvalidArg, "train fraction must be in (0, 1), got {train_fraction}");
    }
    Ok(())
}

/// Seeded permutation of `0..n`; the first `round(train_fraction * n)`
/// entries form the training set.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if n < 2 {
        bail!(TooFewSamples, "need at least 2 samples to split, got {n}");
    }
    check_fraction(train_fraction)?;
    let mut perm: Vec<usize> = (0..n).collect();
    Prng::new(seed).shuffle(&mut perm);
    let n_train = (train_fraction * n as f64).round() as usize;
    let test = perm.split_off(n_train);
    Ok(SplitIndices {
        train: perm,
        test,
        seed,
    })
}

/// Split where every sample of a group (trial) lands on the same side.
/// Groups are permuted with [`split_indices`]; samples keep ascending order.
pub fn split_by_group(groups: &[u32], train_fraction: f64, seed: u64) -> Result<SplitIndices> {
    let mut ids: Vec<u32> = groups.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let by_group = split_indices(ids.len(), train_fraction, seed)?;
    let mut in_train = std::collections::HashSet::new();
    for &g in &by_group.train {
        in_train.insert(ids[g]);
    }
    let (train, test): (Vec<usize>, Vec<usize>) =
        (0..groups.len()).partition(|&i| in_train.contains(&groups[i]));
    Ok(SplitIndices { train, test, seed })
}

/// Extracted samples ready for the network. Every sample carries the class
/// index (0..9) of all four label dimensions; `label_dim` picks the one
/// used as the training target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub n_samples: usize,
    pub seq_len: usize,
    pub input_dim: usize,
    /// (sample, step, input) row-major.
    pub features: Vec<f32>,
    pub class_labels: Vec<[u8; N_LABEL_DIMS]>,
    pub label_dim: LabelDim,
    /// Source trial of each sample.
    pub trial_ids: Vec<u32>,
    pub feature_stats: Option<crate::dsp::norm::NormStats>,
}

impl FeatureDataset {
    pub fn sample_len(&self) -> usize {
        self.seq_len * self.input_dim
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let n = self.sample_len();
        &self.features[i * n..(i + 1) * n]
    }

    pub fn target(&self, i: usize) -> usize {
        self.class_labels[i][self.label_dim.index()] as usize
    }

    pub fn class_target(&self, i: usize) -> ClassTarget {
        ClassTarget::from_class(self.target(i)).expect("class indices are validated")
    }

    pub fn with_label_dim(mut self, dim: LabelDim) -> Self {
        self.label_dim = dim;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let expected = self.n_samples * self.sample_len();
        if self.features.len() != expected {
            bail!(Shape, "features have {} values, expected {}", self.features.len(), expected);
        }
        if self.class_labels.len() != self.n_samples || self.trial_ids.len() != self.n_samples {
            bail!(Shape, "targets or trial ids do not match {} samples", self.n_samples);
        }
        if self.class_labels.iter().flatten().any(|&c| c as usize >= N_CLASSES) {
            bail!(InvalidLabel, "class index outside 0..9");
        }
        if let Some(pos) = self.features.iter().position(|v| !v.is_finite()) {
            bail!(Numeric, "non-finite feature at flat index {pos}");
        }
        if let Some(stats) = &self.feature_stats {
            if stats.mean.len() != self.sample_len() || stats.std.len() != self.sample_len() {
                bail!(Shape, "normalization stats do not match sample length {}", self.sample_len());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn encode_extremes_and_half() {
        assert_eq!(one_hot_encode(9.0).unwrap().0, [0., 0., 0., 0., 0., 0., 0., 0., 1.]);
        assert_eq!(one_hot_encode(1.0).unwrap().class().unwrap(), 0);
        assert_eq!(one_hot_encode(4.5).unwrap().class().unwrap(), 4);
    }

    #[test]
    fn encode_rejects_non_finite() {
        assert!(matches!(one_hot_encode(f64::NAN), Err(Error::InvalidLabel(_))));
        assert!(matches!(one_hot_encode(f64::INFINITY), Err(Error::InvalidLabel(_))));
    }

    #[test]
    fn encode_clamps_out_of_scale() {
        assert_eq!(rating_to_class(0.2).unwrap(), 0);
        assert_eq!(rating_to_class(12.0).unwrap(), 8);
    }

    #[test]
    fn decode_examples() {
        let mut last = [0.0; 9];
        last[8] = 1.0;
        assert_eq!(one_hot_decode(&ClassTarget(last)).unwrap(), 9);
        let mut first = [0.0; 9];
        first[0] = 1.0;
        assert_eq!(one_hot_decode(&ClassTarget(first)).unwrap(), 1);
        for r in 1..=9 {
            assert_eq!(one_hot_decode(&one_hot_encode(r as f64).unwrap()).unwrap(), r);
        }
    }

    #[test]
    fn decode_rejects_malformed() {
        assert!(one_hot_decode(&ClassTarget([0.0; 9])).is_err());
        let mut two = [0.0; 9];
        two[1] = 1.0;
        two[2] = 1.0;
        assert!(one_hot_decode(&ClassTarget(two)).is_err());
        let mut half = [0.0; 9];
        half[3] = 0.5;
        assert!(one_hot_decode(&ClassTarget(half)).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = split_indices(40, 0.8, 11).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (32, 8));
        assert_eq!(s, split_indices(40, 0.8, 11).unwrap());
    }

    #[test]
    fn split_seeds_give_different_permutations() {
        let a = split_indices(10, 0.8, 1).unwrap();
        let b = split_indices(10, 0.8, 2).unwrap();
        assert_eq!(a.train.len(), b.train.len());
        assert_ne!((&a.train, &a.test), (&b.train, &b.test));
        for s in [&a, &b] {
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn split_errors() {
        assert!(matches!(split_indices(1, 0.8, 0), Err(Error::TooFewSamples(_))));
        assert!(matches!(split_indices(10, 1.0, 0), Err(Error::InvalidArg(_))));
    }

    #[test]
    fn group_split_keeps_groups_together() {
        let groups: Vec<u32> = (0..50).map(|i| i / 5).collect();
        let s = split_by_group(&groups, 0.8, 4).unwrap();
        assert_eq!(s.train.len(), 40);
        for &i in &s.test {
            assert!(s.train.iter().all(|&j| groups[j] != groups[i]));
        }
    }

    #[test]
    fn select_target_columns() {
        let ts = TrialSet::new(1, 1, 1, 128.0, vec![0.0], vec![2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(select_target(&ts, LabelDim::Valence), vec![2.0]);
        assert_eq!(select_target(&ts, LabelDim::Dominance), vec![4.0]);
        assert_eq!(select_target(&ts, LabelDim::Liking), vec![5.0]);
    }

    #[test]
    fn trial_set_validation() {
        assert!(matches!(
            TrialSet::new(1, 1, 2, 128.0, vec![0.0], vec![1.0; 4]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            TrialSet::new(1, 1, 1, 128.0, vec![0.0], vec![1.0, 1.0, 9.5, 1.0]),
            Err(Error::InvalidLabel(_))
        ));
        assert!(TrialSet::new(1, 1, 1, 0.0, vec![0.0], vec![1.0; 4]).is_err());
    }

    #[test]
    fn label_dim_parse() {
        for d in LabelDim::ALL {
            assert_eq!(d.name().parse::<LabelDim>().unwrap(), d);
        }
        assert!(matches!("mood".parse::<LabelDim>(), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn split_partitions(n in 2usize..10_000, seed in any::<u64>()) {
            let s = split_indices(n, 0.8, seed).unwrap();
            prop_assert_eq!(s.train.len(), (0.8 * n as f64).round() as usize);
            let mut seen = vec![false; n];
            for &i in s.train.iter().chain(&s.test) {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
            prop_assert!(seen.iter().all(|&b| b));
        }

        #[test]
        fn encode_is_one_hot(r in 1.0f64..=9.0) {
            let t = one_hot_encode(r).unwrap();
            prop_assert_eq!(t.0.iter().sum::<f32>(), 1.0);
            prop_assert!(t.0.iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }
}
