use crate::dsp::fft::FftPlan;
use crate::error::{bail, Result};

/// Symmetric Hann window, `w[i] = 0.5 (1 - cos(2 pi i / (n - 1)))`.
pub fn hann_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        bail!(InvalidArg, "Hann window needs n >= 2, got {n}");
    }
    let denom = (n - 1) as f64;
    Ok((0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / denom).cos()))
        .collect())
}

pub fn rectangular_window(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

/// One-sided power spectrum of a windowed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub power: Vec<f64>,
    pub bin_hz: f64,
}

impl Spectrum {
    pub fn nyquist_hz(&self) -> f64 {
        (self.power.len() - 1) as f64 * self.bin_hz
    }
}

/// `P[0] = |X_0|^2 / N^2`, `P[N/2] = |X_{N/2}|^2 / N^2` and
/// `P[k] = 2 |X_k|^2 / N^2` in between.
pub fn rfft_power(
    plan: &FftPlan,
    frame: &[f64],
    window: &[f64],
    sample_rate_hz: f64,
) -> Result<Spectrum> {
    let n = plan.len();
    if frame.len() != n || window.len() != n {
        bail!(
            InvalidArg,
            "frame ({}) and window ({}) must both have length {n}",
            frame.len(),
            window.len()
        );
    }
    let mut re: Vec<f64> = frame.iter().zip(window).map(|(x, w)| x * w).collect();
    let mut im = vec![0.0; n];
    plan.forward(&mut re, &mut im)?;
    let scale = 1.0 / (n as f64 * n as f64);
    let half = n / 2;
    let power = (0..=half)
        .map(|k| {
            let p = (re[k] * re[k] + im[k] * im[k]) * scale;
            if k == 0 || k == half {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    Ok(Spectrum {
        power,
        bin_hz: sample_rate_hz / n as f64,
    })
}
