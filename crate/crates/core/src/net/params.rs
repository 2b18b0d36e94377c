//! Model configuration, the flat parameter layout, and initialization.
//!
//! All weights live in one flat vector. Blocks follow the stack order:
//! BiLSTM forward, BiLSTM backward, each unidirectional LSTM, each hidden
//! dense layer, the output layer. An LSTM block is the input kernel
//! `(input_dim, 4 * hidden)`, the recurrent kernel `(hidden, 4 * hidden)`
//! and the bias `(4 * hidden)`, all row-major with gate columns ordered
//! (input, forget, cell, output). A dense block is the kernel
//! `(input_dim, output_dim)` followed by the bias.

use std::ops::Range;

use crate::data_model::N_CLASSES;
use crate::error::{bail, Result};
use crate::net::real::Real;
use crate::rng::Prng;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub seq_len: usize,
    pub input_dim: usize,
    pub bi_units: usize,
    pub lstm_units: Vec<usize>,
    /// One rate after the BiLSTM and one after each LSTM.
    pub dropout: Vec<f64>,
    /// Hidden ReLU layers between the last LSTM and the softmax output.
    pub dense_units: Vec<usize>,
    pub n_classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            seq_len: 70,
            input_dim: 1,
            bi_units: 128,
            lstm_units: vec![256, 64, 64, 32],
            dropout: vec![0.6, 0.6, 0.6, 0.6, 0.4],
            dense_units: vec![16],
            n_classes: N_CLASSES,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 || self.input_dim == 0 {
            bail!(Config, "model input shape must be non-zero");
        }
        if self.bi_units == 0 || self.lstm_units.is_empty() || self.lstm_units.contains(&0) {
            bail!(Config, "need a non-empty BiLSTM and at least one non-empty LSTM layer");
        }
        if self.dense_units.contains(&0) || self.n_classes < 2 {
            bail!(Config, "dense layers must be non-empty and n_classes >= 2");
        }
        if self.dropout.len() != self.lstm_units.len() + 1 {
            bail!(
                Config,
                "expected {} dropout rates, got {}",
                self.lstm_units.len() + 1,
                self.dropout.len()
            );
        }
        if let Some(r) = self.dropout.iter().find(|r| !(0.0..1.0).contains(*r)) {
            bail!(Config, "dropout rate {r} outside [0, 1)");
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        Layout::new(self).total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmSlot {
    pub input_dim: usize,
    pub hidden: usize,
    pub offset: usize,
}

impl LstmSlot {
    pub fn len(&self) -> usize {
        4 * self.hidden * (self.input_dim + self.hidden + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn w(&self) -> Range<usize> {
        self.offset..self.offset + self.input_dim * 4 * self.hidden
    }

    pub fn u(&self) -> Range<usize> {
        let start = self.w().end;
        start..start + self.hidden * 4 * self.hidden
    }

    pub fn b(&self) -> Range<usize> {
        let start = self.u().end;
        start..start + 4 * self.hidden
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseSlot {
    pub input_dim: usize,
    pub output_dim: usize,
    pub offset: usize,
}

impl DenseSlot {
    pub fn w(&self) -> Range<usize> {
        self.offset..self.offset + self.input_dim * self.output_dim
    }

    pub fn b(&self) -> Range<usize> {
        let start = self.w().end;
        start..start + self.output_dim
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.b().end
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub bi_fwd: LstmSlot,
    pub bi_bwd: LstmSlot,
    pub lstms: Vec<LstmSlot>,
    /// Hidden ReLU layers, then the softmax output layer last.
    pub dense: Vec<DenseSlot>,
    pub total: usize,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut offset = 0;
        let mut lstm = |input_dim, hidden| {
            let slot = LstmSlot {
                input_dim,
                hidden,
                offset,
            };
            offset += slot.len();
            slot
        };
        let bi_fwd = lstm(cfg.input_dim, cfg.bi_units);
        let bi_bwd = lstm(cfg.input_dim, cfg.bi_units);
        let mut prev = 2 * cfg.bi_units;
        let lstms = cfg
            .lstm_units
            .iter()
            .map(|&h| {
                let s = lstm(prev, h);
                prev = h;
                s
            })
            .collect();
        let mut dense = Vec::new();
        for &out in cfg.dense_units.iter().chain(std::iter::once(&cfg.n_classes)) {
            let slot = DenseSlot {
                input_dim: prev,
                output_dim: out,
                offset,
            };
            offset = slot.range().end;
            prev = out;
            dense.push(slot);
        }
        Layout {
            bi_fwd,
            bi_bwd,
            lstms,
            dense,
            total: offset,
        }
    }

    /// Named parameter blocks in canonical order.
    pub fn blocks(&self) -> Vec<(String, Range<usize>)> {
        let mut out = vec![
            ("bilstm.fwd".to_string(), self.bi_fwd.range()),
            ("bilstm.bwd".to_string(), self.bi_bwd.range()),
        ];
        for (i, s) in self.lstms.iter().enumerate() {
            out.push((format!("lstm{}", i + 1), s.range()));
        }
        let n = self.dense.len();
        for (i, s) in self.dense.iter().enumerate() {
            let name = if i + 1 == n {
                "output".to_string()
            } else {
                format!("dense{}", i + 1)
            };
            out.push((name, s.range()));
        }
        out
    }

    pub fn lstm_slots(&self) -> impl Iterator<Item = &LstmSlot> {
        [&self.bi_fwd, &self.bi_bwd].into_iter().chain(self.lstms.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub config: ModelConfig,
    pub layout: Layout,
    pub values: Vec<F>,
}

impl<F: Real> ModelParams<F> {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config);
        Ok(ModelParams {
            values: vec![F::zero(); layout.total],
            config: config.clone(),
            layout,
        })
    }

    pub fn from_values(config: &ModelConfig, values: Vec<F>) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        if values.len() != p.layout.total {
            bail!(
                Shape,
                "{} parameter values for a model with {}",
                values.len(),
                p.layout.total
            );
        }
        p.values = values;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        ModelParams {
            config: self.config.clone(),
            layout: self.layout.clone(),
            values: self.values.iter().map(|v| G::of(v.as_f64())).collect(),
        }
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Glorot-uniform kernels (input and recurrent alike), zero biases except
/// the LSTM forget gate at 1.0. Values are drawn from one stream in
/// canonical layout order, row-major within each kernel.
pub fn init_params<F: Real>(config: &ModelConfig, seed: u64) -> Result<ModelParams<F>> {
    let mut p = ModelParams::<F>::zeros(config)?;
    let mut rng = Prng::new(seed);
    let mut fill = |values: &mut [F], fan_in: usize, fan_out: usize| {
        let bound = glorot_bound(fan_in, fan_out);
        for v in values {
            *v = F::of((2.0 * rng.uniform() - 1.0) * bound);
        }
    };
    let layout = p.layout.clone();
    for slot in layout.lstm_slots() {
        let h4 = 4 * slot.hidden;
        fill(&mut p.values[slot.w()], slot.input_dim, h4);
        fill(&mut p.values[slot.u()], slot.hidden, h4);
        let b = slot.b();
        for v in &mut p.values[b.start + slot.hidden..b.start + 2 * slot.hidden] {
            *v = F::one();
        }
    }
    for slot in &layout.dense {
        fill(&mut p.values[slot.w()], slot.input_dim, slot.output_dim);
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_param_count_closed_form() {
        // Independent closed form: an LSTM with input d and hidden h has
        // 4h(d + h + 1) weights; a dense layer has (d + 1) * out.
        let lstm = |d: usize, h: usize| 4 * h * (d + h + 1);
        let expected = 2 * lstm(1, 128)
            + lstm(256, 256)
            + lstm(256, 64)
            + lstm(64, 64)
            + lstm(64, 32)
            + (32 + 1) * 16
            + (16 + 1) * 9;
        assert_eq!(expected, 786_729);
        assert_eq!(ModelConfig::default().param_count(), expected);
        assert_eq!(2 * (4 * 128 * (1 + 128 + 1)), 133_120);
    }

    #[test]
    fn blocks_tile_the_vector() {
        let layout = Layout::new(&ModelConfig::default());
        let blocks = layout.blocks();
        assert_eq!(blocks.len(), 8);
        let mut end = 0;
        for (_, r) in &blocks {
            assert_eq!(r.start, end);
            end = r.end;
        }
        assert_eq!(end, layout.total);
        assert_eq!(layout.lstms[0].input_dim, 256);
    }

    #[test]
    fn init_rules() {
        let cfg = ModelConfig {
            bi_units: 8,
            lstm_units: vec![6, 4],
            dropout: vec![0.5; 3],
            ..ModelConfig::default()
        };
        let p = init_params::<f32>(&cfg, 3).unwrap();
        for slot in p.layout.lstm_slots() {
            let b = &p.values[slot.b()];
            let h = slot.hidden;
            assert!(b[h..2 * h].iter().all(|&v| v == 1.0));
            assert!(b[..h].iter().chain(&b[2 * h..]).all(|&v| v == 0.0));
            let wb = glorot_bound(slot.input_dim, 4 * h) as f32;
            assert!(p.values[slot.w()].iter().all(|v| v.abs() <= wb));
            let ub = glorot_bound(h, 4 * h) as f32;
            assert!(p.values[slot.u()].iter().all(|v| v.abs() <= ub));
        }
        let again = init_params::<f32>(&cfg, 3).unwrap();
        assert!(p.values.iter().zip(&again.values).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_ne!(p.values, init_params::<f32>(&cfg, 4).unwrap().values);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ModelConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.dropout.pop();
        assert!(cfg.validate().is_err());
        let cfg = ModelConfig {
            dropout: vec![0.6, 0.6, 1.0, 0.6, 0.4],
            ..ModelConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
