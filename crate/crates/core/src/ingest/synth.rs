//! Labeled synthetic EEG whose class is coded in the per-band amplitudes.

use std::f64::consts::PI;

use crate::config::{parse_list, IniDoc};
use crate::data_model::{LabelDim, TrialSet, N_CLASSES, N_LABEL_DIMS};
use crate::dsp::bands::BandTable;
use crate::error::{bail, Result};
use crate::rng::Prng;

pub const N_BANDS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_trials: usize,
    pub n_channels: usize,
    pub n_samples: usize,
    pub sample_rate_hz: f32,
    /// `class_band_map[k][b]`: amplitude of band `b` for class `k + 1`.
    pub class_band_map: [[f64; N_BANDS]; N_CLASSES],
    pub noise_std: f64,
    pub seed: u64,
    pub label_dim_to_drive: LabelDim,
}

/// Amplitude pattern of the default generator. Each class has a distinct
/// profile; gamma grows linearly with the class so class 9 carries 9x the
/// gamma amplitude of class 1.
pub fn default_class_band_map() -> [[f64; N_BANDS]; N_CLASSES] {
    let mut map = [[0.0; N_BANDS]; N_CLASSES];
    for (i, row) in map.iter_mut().enumerate() {
        let k = (i + 1) as f64;
        *row = [
            10.0 - k,
            1.0 + (i % 3) as f64,
            1.0 + (i / 3) as f64,
            1.0,
            k,
        ];
    }
    map
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_trials: 36,
            n_channels: 32,
            n_samples: 1120,
            sample_rate_hz: 128.0,
            class_band_map: default_class_band_map(),
            noise_std: 0.1,
            seed: 2024,
            label_dim_to_drive: LabelDim::Valence,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 || self.n_channels == 0 || self.n_samples == 0 {
            bail!(Config, "synth: counts must be >= 1");
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            bail!(Config, "synth: sample_rate must be positive");
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            bail!(Config, "synth: noise_std must be >= 0, got {}", self.noise_std);
        }
        if self
            .class_band_map
            .iter()
            .flatten()
            .any(|a| !(a.is_finite() && *a >= 0.0))
        {
            bail!(Config, "synth: band multipliers must be finite and >= 0");
        }
        Ok(())
    }

    /// Class (1..=9) assigned to a trial, round-robin.
    pub fn class_of_trial(trial: usize) -> usize {
        trial % N_CLASSES + 1
    }

    pub fn from_ini(text: &str) -> Result<Self> {
        let doc = IniDoc::parse(text)?;
        let mut spec = SynthSpec::default();
        for (key, value) in doc.entries() {
            match key {
                "n_trials" => spec.n_trials = doc.parse_value(key, value)?,
                "n_channels" => spec.n_channels = doc.parse_value(key, value)?,
                "n_samples" => spec.n_samples = doc.parse_value(key, value)?,
                "sample_rate" => spec.sample_rate_hz = doc.parse_value(key, value)?,
                "noise_std" => spec.noise_std = doc.parse_value(key, value)?,
                "seed" => spec.seed = doc.parse_value(key, value)?,
                "label_dim" => spec.label_dim_to_drive = value.parse()?,
                k if k.starts_with("class_") => {
                    let class: usize = k[6..]
                        .parse()
                        .ok()
                        .filter(|c| (1..=N_CLASSES).contains(c))
                        .ok_or_else(|| crate::Error::Config(format!("synth: bad key {k:?}")))?;
                    let amps: Vec<f64> = parse_list(key, value)?;
                    if amps.len() != N_BANDS {
                        bail!(Config, "synth: {k} needs {N_BANDS} amplitudes, got {}", amps.len());
                    }
                    spec.class_band_map[class - 1].copy_from_slice(&amps);
                }
                other => bail!(Config, "synth: unknown key {other:?}"),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("n_trials = {}\n", self.n_trials));
        out.push_str(&format!("n_channels = {}\n", self.n_channels));
        out.push_str(&format!("n_samples = {}\n", self.n_samples));
        out.push_str(&format!("sample_rate = {}\n", self.sample_rate_hz));
        out.push_str(&format!("noise_std = {}\n", self.noise_std));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("label_dim = {}\n", self.label_dim_to_drive));
        for (i, row) in self.class_band_map.iter().enumerate() {
            let amps: Vec<String> = row.iter().map(|a| a.to_string()).collect();
            out.push_str(&format!("class_{} = {}\n", i + 1, amps.join(",")));
        }
        out
    }
}

/// Generates the trial set. Each (trial, channel) pair draws from its own
/// derived stream: five phases, then one normal deviate per sample when
/// `noise_std > 0`.
pub fn synth_generate(spec: &SynthSpec) -> Result<TrialSet> {
    spec.validate()?;
    let centers = BandTable::default().centers();
    let fs = spec.sample_rate_hz as f64;
    let mut data = vec![0.0f32; spec.n_trials * spec.n_channels * spec.n_samples];
    let mut labels = vec![5.0f32; spec.n_trials * N_LABEL_DIMS];

    for (trial, trial_data) in data
        .chunks_exact_mut(spec.n_channels * spec.n_samples)
        .enumerate()
    {
        let class = SynthSpec::class_of_trial(trial);
        let amps = &spec.class_band_map[class - 1];
        labels[trial * N_LABEL_DIMS + spec.label_dim_to_drive.index()] = class as f32;
        for (channel, out) in trial_data.chunks_exact_mut(spec.n_samples).enumerate() {
            let mut rng = Prng::derived(spec.seed, &[trial as u64, channel as u64]);
            let phases: [f64; N_BANDS] = std::array::from_fn(|_| 2.0 * PI * rng.uniform());
            for (n, x) in out.iter_mut().enumerate() {
                let t = n as f64 / fs;
                let mut v = 0.0;
                for b in 0..N_BANDS {
                    if amps[b] != 0.0 {
                        v += amps[b] * (2.0 * PI * centers[b] * t + phases[b]).sin();
                    }
                }
                if spec.noise_std > 0.0 {
                    v += spec.noise_std * rng.normal();
                }
                *x = v as f32;
            }
        }
    }
    TrialSet::new(
        spec.n_trials,
        spec.n_channels,
        spec.n_samples,
        spec.sample_rate_hz,
        data,
        labels,
    )
}
