//! Central finite-difference check of the analytic BPTT gradients in
//! 64-bit precision on a tiny model.

use crate::error::Result;
use crate::net::layers::DropoutMode;
use crate::net::model::{batch_gradients, sample_forward, sample_loss, DropoutCtx};
use crate::net::params::{ModelConfig, ModelParams};
use crate::par::Parallelism;
use crate::rng::{derive_seed, Prng};

/// Floor on the relative-error denominator, so entries whose true gradient
/// is ~0 are judged by absolute error (central-difference roundoff is
/// around 1e-11 at step 1e-5).
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub model: ModelConfig,
    pub batch: usize,
    pub step: f64,
    pub threshold: f64,
    pub seed: u64,
    /// Train mode holds fixed dropout masks, so the loss stays a smooth
    /// function of the parameters.
    pub mode: DropoutMode,
}

impl GradCheckConfig {
    /// T = 3, d = 2, BiLSTM 4 per direction, LSTMs 6/3/3/2, batch 2.
    pub fn tiny(seed: u64) -> Self {
        GradCheckConfig {
            model: ModelConfig {
                seq_len: 3,
                input_dim: 2,
                bi_units: 4,
                lstm_units: vec![6, 3, 3, 2],
                dropout: vec![0.6, 0.6, 0.6, 0.6, 0.4],
                dense_units: vec![16],
                n_classes: 9,
            },
            batch: 2,
            step: 1e-5,
            threshold: 1e-4,
            seed,
            mode: DropoutMode::Train,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub name: String,
    pub n_params: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub max_rel_err: f64,
    pub threshold: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.threshold
    }
}

/// Random inputs, targets and parameters for the rig.
pub struct Rig {
    pub params: ModelParams<f64>,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<usize>,
}

impl Rig {
    pub fn new(cfg: &GradCheckConfig) -> Result<Self> {
        // Every entry, biases included, is drawn from U(-0.5, 0.5). With
        // Glorot weights and zero biases the deep stack's output is tiny and
        // dense pre-activations sit within one step of the ReLU kink.
        let mut params = ModelParams::<f64>::zeros(&cfg.model)?;
        let mut prng = Prng::derived(cfg.seed, &[1]);
        for v in &mut params.values {
            *v = prng.uniform() - 0.5;
        }
        let mut rng = Prng::derived(cfg.seed, &[2]);
        let n = cfg.model.seq_len * cfg.model.input_dim;
        let inputs = (0..cfg.batch).map(|_| (0..n).map(|_| rng.normal()).collect()).collect();
        let targets = (0..cfg.batch).map(|_| rng.below(cfg.model.n_classes)).collect();
        Ok(Rig {
            params,
            inputs,
            targets,
        })
    }

    fn slices(&self) -> Vec<&[f64]> {
        self.inputs.iter().map(Vec::as_slice).collect()
    }

    /// Mean cross-entropy with sample `i` using dropout key `i`.
    pub fn loss(&self, params: &ModelParams<f64>, mode: DropoutMode, seed: u64) -> Result<f64> {
        let mut total = 0.0;
        for (i, (x, &t)) in self.inputs.iter().zip(&self.targets).enumerate() {
            let ctx = DropoutCtx {
                mode,
                seed,
                key: i as u64,
            };
            let (p, _) = sample_forward(params, x, ctx, false)?;
            total += sample_loss(&p, t);
        }
        Ok(total / self.inputs.len() as f64)
    }

    pub fn analytic(&self, mode: DropoutMode, seed: u64) -> Result<Vec<f64>> {
        let keys: Vec<u64> = (0..self.inputs.len() as u64).collect();
        let out = batch_gradients(&self.params, &self.slices(), &self.targets, &keys, mode, seed, Parallelism::Serial)?;
        Ok(out.grads)
    }
}

/// Compares every analytic gradient entry with a central difference.
/// `corrupt` may tamper with the analytic gradient before comparison.
pub fn gradient_check(cfg: &GradCheckConfig, corrupt: Option<&dyn Fn(&mut [f64])>) -> Result<GradCheckReport> {
    let rig = Rig::new(cfg)?;
    let mask_seed = derive_seed(cfg.seed, &[3]);
    let mut analytic = rig.analytic(cfg.mode, mask_seed)?;
    if let Some(f) = corrupt {
        f(&mut analytic);
    }
    let mut probe = rig.params.clone();
    let mut blocks = Vec::new();
    for (name, range) in rig.params.layout.blocks() {
        let mut report = BlockReport {
            name,
            n_params: range.len(),
            max_rel_err: 0.0,
            worst_index: range.start,
        };
        for i in range {
            let orig = probe.values[i];
            probe.values[i] = orig + cfg.step;
            let up = rig.loss(&probe, cfg.mode, mask_seed)?;
            probe.values[i] = orig - cfg.step;
            let down = rig.loss(&probe, cfg.mode, mask_seed)?;
            probe.values[i] = orig;
            let numeric = (up - down) / (2.0 * cfg.step);
            let err = relative_error(analytic[i], numeric);
            // NaN must register as a failure.
            if err > report.max_rel_err || err.is_nan() {
                report.max_rel_err = if err.is_nan() { f64::INFINITY } else { err };
                report.worst_index = i;
            }
        }
        blocks.push(report);
    }
    let max_rel_err = blocks.iter().map(|b| b.max_rel_err).fold(0.0, f64::max);
    Ok(GradCheckReport {
        blocks,
        max_rel_err,
        threshold: cfg.threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_rig_passes_in_both_modes() {
        for seed in 0..6 {
            for mode in [DropoutMode::Train, DropoutMode::Inference] {
                let cfg = GradCheckConfig {
                    mode,
                    ..GradCheckConfig::tiny(seed)
                };
                let r = gradient_check(&cfg, None).unwrap();
                assert!(r.passed(), "seed {seed} {mode}: {r:#?}");
            }
        }
    }

    #[test]
    fn corruption_is_caught() {
        let hook = |g: &mut [f64]| g[5] += 0.01;
        let r = gradient_check(&GradCheckConfig::tiny(7), Some(&hook)).unwrap();
        assert!(!r.passed());
        assert_eq!(r.blocks[0].worst_index, 5);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!(relative_error(1e-12, 0.0) < 1e-5);
    }
}
