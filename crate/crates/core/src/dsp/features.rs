use std::fmt;
use std::str::FromStr;

use crate::data_model::TrialSet;
use crate::dsp::bands::BandTable;
use crate::dsp::fft::FftPlan;
use crate::dsp::spectrum::{hann_window, rfft_power};
use crate::error::{bail, Error, Result};
use crate::par::Parallelism;

/// AF3, F7, F3, FC5, T7, P7, O1, O2, P8, T8, FC6, F4, F8, AF4 in the
/// 32-channel Geneva ordering used by DEAP.
pub const EPOC_14: [usize; 14] = [1, 3, 2, 4, 7, 11, 13, 31, 29, 25, 21, 19, 20, 17];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelSubset(Vec<usize>);

impl Default for ChannelSubset {
    fn default() -> Self {
        ChannelSubset(EPOC_14.to_vec())
    }
}

impl ChannelSubset {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            bail!(Config, "channel subset is empty");
        }
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            bail!(Config, "channel subset has duplicate indices: {indices:?}");
        }
        Ok(ChannelSubset(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for ChannelSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPlan {
    pub window_len: usize,
    pub hop: usize,
}

impl Default for WindowPlan {
    fn default() -> Self {
        // 2 s windows advanced by 0.125 s at 128 Hz.
        WindowPlan {
            window_len: 256,
            hop: 16,
        }
    }
}

impl WindowPlan {
    pub fn validate(&self) -> Result<()> {
        if !self.window_len.is_power_of_two() || self.window_len < 2 {
            bail!(Config, "window_len must be a power of two >= 2, got {}", self.window_len);
        }
        if self.hop == 0 || self.hop > self.window_len {
            bail!(Config, "hop must be in 1..={}, got {}", self.window_len, self.hop);
        }
        Ok(())
    }

    pub fn n_windows(&self, n_samples: usize) -> usize {
        if n_samples < self.window_len {
            0
        } else {
            (n_samples - self.window_len) / self.hop + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureOptions {
    pub expected_rate_hz: f32,
    pub allow_rate_mismatch: bool,
    pub log_power: bool,
    pub parallelism: Parallelism,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            expected_rate_hz: 128.0,
            allow_rate_mismatch: false,
            log_power: false,
            parallelism: Parallelism::default(),
        }
    }
}

/// Per-window band-power vectors, laid out (trial, window, channel, band).
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    pub n_trials: usize,
    pub n_windows: usize,
    pub dim: usize,
    pub values: Vec<f32>,
    /// Source trial of every window, in window order.
    pub trial_index: Vec<u32>,
}

impl RawFeatures {
    pub fn window(&self, trial: usize, w: usize) -> &[f32] {
        let start = (trial * self.n_windows + w) * self.dim;
        &self.values[start..start + self.dim]
    }
}

pub fn extract_features(
    ts: &TrialSet,
    subset: &ChannelSubset,
    bands: &BandTable,
    plan: &WindowPlan,
    opts: &FeatureOptions,
) -> Result<RawFeatures> {
    ts.validate()?;
    plan.validate()?;
    if ts.sample_rate_hz != opts.expected_rate_hz && !opts.allow_rate_mismatch {
        bail!(
            InvalidArg,
            "sample rate {} Hz differs from the expected {} Hz (override with allow_rate_mismatch)",
            ts.sample_rate_hz,
            opts.expected_rate_hz
        );
    }
    if let Some(&bad) = subset.indices().iter().find(|&&c| c >= ts.n_channels) {
        bail!(
            Config,
            "channel index {bad} out of range for {} channels",
            ts.n_channels
        );
    }
    if ts.n_samples < plan.window_len {
        bail!(
            InvalidArg,
            "trials have {} samples, fewer than the window length {}",
            ts.n_samples,
            plan.window_len
        );
    }
    let fft = FftPlan::new(plan.window_len)?;
    let window = hann_window(plan.window_len)?;
    let fs = ts.sample_rate_hz as f64;
    // Validate the band table against this resolution once, up front.
    bands.bin_ranges(fs / plan.window_len as f64, plan.window_len / 2 + 1)?;

    let n_windows = plan.n_windows(ts.n_samples);
    let dim = subset.len() * bands.len();
    let mut values = vec![0.0f32; ts.n_trials * n_windows * dim];

    opts.parallelism
        .for_each_chunk_mut(&mut values, n_windows * dim, |trial, out| {
            let mut frame = vec![0.0f64; plan.window_len];
            for (w, slot) in out.chunks_exact_mut(dim).enumerate() {
                let start = w * plan.hop;
                for (c, &channel) in subset.indices().iter().enumerate() {
                    let signal = &ts.channel(trial, channel)[start..start + plan.window_len];
                    for (f, &x) in frame.iter_mut().zip(signal) {
                        *f = x as f64;
                    }
                    // Inputs and tables were validated above.
                    let spectrum = rfft_power(&fft, &frame, &window, fs).expect("validated frame");
                    let powers = bands.powers(&spectrum).expect("validated bands");
                    for (b, p) in powers.into_iter().enumerate() {
                        let v = if opts.log_power { (p + 1e-12).ln() } else { p };
                        slot[c * bands.len() + b] = v as f32;
                    }
                }
            }
        });

    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite feature at flat index {pos}; input contains NaN/Inf or overflows f32"
        )));
    }
    let trial_index = (0..ts.n_trials)
        .flat_map(|t| std::iter::repeat_n(t as u32, n_windows))
        .collect();
    Ok(RawFeatures {
        n_trials: ts.n_trials,
        n_windows,
        dim,
        values,
        trial_index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[derive(Default)]
pub enum SequenceMode {
    /// Each window is one sample; its features are the time steps.
    #[default]
    FeatureAsSteps,
    /// Non-overlapping runs of `W` windows are one sample of `W` steps.
    WindowAsSteps(usize),
}


impl FromStr for SequenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "feature_as_steps" {
            return Ok(SequenceMode::FeatureAsSteps);
        }
        if let Some(w) = s.strip_prefix("window_as_steps:") {
            let w: usize = w
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad window count in {s:?}")))?;
            if w == 0 {
                bail!(Config, "window_as_steps needs W >= 1");
            }
            return Ok(SequenceMode::WindowAsSteps(w));
        }
        Err(Error::Config(format!(
            "sequence_mode must be feature_as_steps or window_as_steps:W, got {s:?}"
        )))
    }
}

impl fmt::Display for SequenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceMode::FeatureAsSteps => f.write_str("feature_as_steps"),
            SequenceMode::WindowAsSteps(w) => write!(f, "window_as_steps:{w}"),
        }
    }
}
