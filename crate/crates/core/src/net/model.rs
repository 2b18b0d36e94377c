//! Forward and backward passes of the full stack:
//! BiLSTM -> dropout -> [LSTM -> dropout]* -> [Dense(ReLU)]* -> Dense(softmax).
//!
//! Every LSTM except the last returns sequences; the last emits its final
//! step. Dropout masks are drawn per (sample key, dropout position) from
//! `derive_seed(seed, [key, position])`, so a sample's masks never depend
//! on which thread runs it.

use crate::error::{bail, Result};
use crate::net::layers::{affine, relu_in_place, softmax, DropoutMode};
use crate::net::lstm::{concat_steps, lstm_layer_backward, lstm_layer_forward, LstmGrads, LstmTrace, LstmWeights};
use crate::net::params::{LstmSlot, ModelParams};
use crate::net::real::Real;
use crate::par::Parallelism;
use crate::rng::Prng;

/// Floor applied to the target probability inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DropoutCtx {
    pub mode: DropoutMode,
    pub seed: u64,
    pub key: u64,
}

impl DropoutCtx {
    pub fn inference() -> Self {
        DropoutCtx {
            mode: DropoutMode::Inference,
            seed: 0,
            key: 0,
        }
    }

    fn mask<F: Real>(&self, position: usize, rate: f64, len: usize) -> Option<Vec<F>> {
        if self.mode == DropoutMode::Inference || rate == 0.0 {
            return None;
        }
        let mut rng = Prng::derived(self.seed, &[self.key, position as u64]);
        Some(crate::net::layers::dropout_mask(len, rate, &mut rng).expect("rates validated by config"))
    }
}

/// Activations retained from a training-mode forward pass of one sample.
#[derive(Debug, Clone)]
pub struct SampleCache<F> {
    input: Vec<F>,
    bi_fwd: LstmTrace<F>,
    bi_bwd: LstmTrace<F>,
    /// Input of each unidirectional LSTM, after dropout.
    lstm_inputs: Vec<Vec<F>>,
    lstm_traces: Vec<LstmTrace<F>>,
    /// `masks[0]` follows the BiLSTM, `masks[l + 1]` follows LSTM `l`.
    masks: Vec<Option<Vec<F>>>,
    dense_inputs: Vec<Vec<F>>,
    /// Pre-activations of the hidden (ReLU) dense layers.
    dense_pre: Vec<Vec<F>>,
    pub probs: Vec<F>,
}

fn weights<'a, F: Real>(p: &'a ModelParams<F>, slot: &LstmSlot) -> LstmWeights<'a, F> {
    LstmWeights {
        input_dim: slot.input_dim,
        hidden: slot.hidden,
        w: &p.values[slot.w()],
        u: &p.values[slot.u()],
        b: &p.values[slot.b()],
    }
}

fn apply_mask<F: Real>(x: &mut [F], mask: &Option<Vec<F>>) {
    if let Some(m) = mask {
        for (v, &k) in x.iter_mut().zip(m) {
            *v *= k;
        }
    }
}

fn check_input<F: Real>(params: &ModelParams<F>, x: &[F]) -> Result<()> {
    let cfg = &params.config;
    if x.len() != cfg.seq_len * cfg.input_dim {
        bail!(
            Shape,
            "sample has {} values, model expects ({}, {})",
            x.len(),
            cfg.seq_len,
            cfg.input_dim
        );
    }
    Ok(())
}

/// Forward pass of one `(seq_len, input_dim)` sample. Returns class
/// probabilities and, when `keep_cache`, the activations for backward.
pub fn sample_forward<F: Real>(
    params: &ModelParams<F>,
    x: &[F],
    dropout: DropoutCtx,
    keep_cache: bool,
) -> Result<(Vec<F>, Option<SampleCache<F>>)> {
    check_input(params, x)?;
    let cfg = &params.config;
    let layout = &params.layout;
    let bi_fwd = lstm_layer_forward(&weights(params, &layout.bi_fwd), x, false)?;
    let bi_bwd = lstm_layer_forward(&weights(params, &layout.bi_bwd), x, true)?;
    let mut seq = concat_steps(&bi_fwd, &bi_bwd);
    let mut masks = Vec::with_capacity(layout.lstms.len() + 1);
    let m0 = dropout.mask(0, cfg.dropout[0], seq.len());
    apply_mask(&mut seq, &m0);
    masks.push(m0);

    let n_lstm = layout.lstms.len();
    let mut lstm_inputs = Vec::with_capacity(n_lstm);
    let mut lstm_traces = Vec::with_capacity(n_lstm);
    let mut last = Vec::new();
    for (l, slot) in layout.lstms.iter().enumerate() {
        let trace = lstm_layer_forward(&weights(params, slot), &seq, false)?;
        let mut out = if l + 1 == n_lstm {
            trace.last_output().to_vec()
        } else {
            trace.h.clone()
        };
        let m = dropout.mask(l + 1, cfg.dropout[l + 1], out.len());
        apply_mask(&mut out, &m);
        masks.push(m);
        if keep_cache {
            lstm_inputs.push(std::mem::take(&mut seq));
            lstm_traces.push(trace);
        }
        if l + 1 == n_lstm {
            last = out;
        } else {
            seq = out;
        }
    }

    let n_dense = layout.dense.len();
    let mut dense_inputs = Vec::with_capacity(n_dense);
    let mut dense_pre = Vec::with_capacity(n_dense.saturating_sub(1));
    let mut act = last;
    let mut probs = Vec::new();
    for (k, slot) in layout.dense.iter().enumerate() {
        let z = affine(&act, &params.values[slot.w()], &params.values[slot.b()]);
        if keep_cache {
            dense_inputs.push(act.clone());
        }
        if k + 1 == n_dense {
            probs = softmax(&z);
        } else {
            let mut a = z.clone();
            relu_in_place(&mut a);
            if keep_cache {
                dense_pre.push(z);
            }
            act = a;
        }
    }

    let cache = keep_cache.then(|| SampleCache {
        input: x.to_vec(),
        bi_fwd,
        bi_bwd,
        lstm_inputs,
        lstm_traces,
        masks,
        dense_inputs,
        dense_pre,
        probs: probs.clone(),
    });
    Ok((probs, cache))
}

/// Backward pass of one sample for the fused softmax + cross-entropy loss:
/// the output-layer gradient is `scale * (p - onehot(target))`. Gradients
/// are added into `grads` (laid out like the parameters).
pub fn sample_backward<F: Real>(
    params: &ModelParams<F>,
    cache: &SampleCache<F>,
    target: usize,
    scale: F,
    grads: &mut [F],
) {
    let layout = &params.layout;
    let vals = &params.values;

    let mut dz: Vec<F> = cache.probs.iter().map(|&p| p * scale).collect();
    dz[target] -= scale;

    // Dense layers, output first.
    let n_dense = layout.dense.len();
    for k in (0..n_dense).rev() {
        let slot = &layout.dense[k];
        let input = &cache.dense_inputs[k];
        let cols = slot.output_dim;
        {
            let gw = &mut grads[slot.w()];
            for (i, &xi) in input.iter().enumerate() {
                for (g, &d) in gw[i * cols..(i + 1) * cols].iter_mut().zip(&dz) {
                    *g += xi * d;
                }
            }
        }
        for (g, &d) in grads[slot.b()].iter_mut().zip(&dz) {
            *g += d;
        }
        let w = &vals[slot.w()];
        let mut d_in: Vec<F> = (0..slot.input_dim)
            .map(|i| {
                w[i * cols..(i + 1) * cols]
                    .iter()
                    .zip(&dz)
                    .fold(F::zero(), |acc, (&wv, &d)| acc + wv * d)
            })
            .collect();
        if k > 0 {
            for (d, &pre) in d_in.iter_mut().zip(&cache.dense_pre[k - 1]) {
                if pre <= F::zero() {
                    *d = F::zero();
                }
            }
        }
        dz = d_in;
    }

    // Last LSTM: only its final step feeds the dense stack.
    let n_lstm = layout.lstms.len();
    apply_mask(&mut dz, &cache.masks[n_lstm]);
    let last_slot = &layout.lstms[n_lstm - 1];
    let steps = cache.lstm_traces[n_lstm - 1].steps;
    let mut dh = vec![F::zero(); steps * last_slot.hidden];
    dh[(steps - 1) * last_slot.hidden..].copy_from_slice(&dz);

    for l in (0..n_lstm).rev() {
        let slot = &layout.lstms[l];
        let mut dx = vec![F::zero(); steps * slot.input_dim];
        {
            let (w_r, u_r, b_r) = (slot.w(), slot.u(), slot.b());
            let block = &mut grads[slot.range()];
            let base = slot.offset;
            let (gw, rest) = block.split_at_mut(w_r.end - base);
            let (gu, gb) = rest.split_at_mut(u_r.end - w_r.end);
            debug_assert_eq!(gb.len(), b_r.len());
            lstm_layer_backward(
                &weights(params, slot),
                &cache.lstm_inputs[l],
                &cache.lstm_traces[l],
                &dh,
                &mut LstmGrads { w: gw, u: gu, b: gb },
                Some(&mut dx),
            );
        }
        apply_mask(&mut dx, &cache.masks[l]);
        dh = dx;
    }

    // dh is now the gradient of the concatenated BiLSTM output.
    let hb = layout.bi_fwd.hidden;
    let mut dh_f = Vec::with_capacity(steps * hb);
    let mut dh_b = Vec::with_capacity(steps * hb);
    for t in 0..steps {
        dh_f.extend_from_slice(&dh[t * 2 * hb..t * 2 * hb + hb]);
        dh_b.extend_from_slice(&dh[t * 2 * hb + hb..(t + 1) * 2 * hb]);
    }
    for (slot, trace, d) in [
        (&layout.bi_fwd, &cache.bi_fwd, &dh_f),
        (&layout.bi_bwd, &cache.bi_bwd, &dh_b),
    ] {
        let block = &mut grads[slot.range()];
        let (gw, rest) = block.split_at_mut(slot.input_dim * 4 * slot.hidden);
        let (gu, gb) = rest.split_at_mut(slot.hidden * 4 * slot.hidden);
        lstm_layer_backward(
            &weights(params, slot),
            &cache.input,
            trace,
            d,
            &mut LstmGrads { w: gw, u: gu, b: gb },
            None,
        );
    }
}

/// Cross-entropy of one probability row against a class index.
pub fn sample_loss<F: Real>(probs: &[F], target: usize) -> f64 {
    -probs[target].as_f64().max(PROB_FLOOR).ln()
}

/// Retained per-sample caches of a training-mode batch forward.
#[derive(Debug, Clone)]
pub struct BatchCache<F> {
    pub samples: Vec<SampleCache<F>>,
}

/// Forward pass over a `(B, seq_len, input_dim)` batch. Returns the
/// `(B, n_classes)` probabilities; the cache is kept in training mode.
/// Sample `i` uses dropout key `i`.
pub fn model_forward<F: Real>(
    params: &ModelParams<F>,
    batch: &[F],
    mode: DropoutMode,
    seed: u64,
    par: Parallelism,
) -> Result<(Vec<F>, Option<BatchCache<F>>)> {
    let n = params.config.seq_len * params.config.input_dim;
    if batch.is_empty() || !batch.len().is_multiple_of(n) {
        bail!(Shape, "batch of {} values is not a multiple of the sample size {n}", batch.len());
    }
    let b = batch.len() / n;
    let train = mode == DropoutMode::Train;
    let results = par.map(b, |i| {
        let ctx = DropoutCtx {
            mode,
            seed,
            key: i as u64,
        };
        sample_forward(params, &batch[i * n..(i + 1) * n], ctx, train)
    });
    let mut probs = Vec::with_capacity(b * params.config.n_classes);
    let mut caches = Vec::new();
    for r in results {
        let (p, c) = r?;
        probs.extend(p);
        caches.extend(c);
    }
    Ok((probs, train.then_some(BatchCache { samples: caches })))
}

/// Gradients of the mean cross-entropy for a cached batch. Per-sample
/// gradients are summed in ascending sample order.
pub fn model_backward<F: Real>(
    params: &ModelParams<F>,
    cache: Option<&BatchCache<F>>,
    targets: &[usize],
    par: Parallelism,
) -> Result<Vec<F>> {
    let cache = match cache {
        Some(c) => c,
        None => bail!(State, "backward needs the cache of a training-mode forward pass"),
    };
    if targets.len() != cache.samples.len() {
        bail!(Shape, "{} targets for {} cached samples", targets.len(), cache.samples.len());
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= params.config.n_classes) {
        bail!(InvalidLabel, "target class {t} out of range");
    }
    let scale = F::one() / F::of(targets.len() as f64);
    let per_sample = par.map(targets.len(), |i| {
        let mut g = vec![F::zero(); params.len()];
        sample_backward(params, &cache.samples[i], targets[i], scale, &mut g);
        g
    });
    let mut total = vec![F::zero(); params.len()];
    for g in per_sample {
        for (t, v) in total.iter_mut().zip(g) {
            *t += v;
        }
    }
    Ok(total)
}

/// Samples per parallel work unit in [`batch_gradients`]. It bounds memory
/// only; results do not depend on it.
const GRAD_CHUNK: usize = 16;

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<F: Real>(row: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct BatchGradients<F> {
    /// Summed (not averaged) cross-entropy of the batch.
    pub loss_sum: f64,
    /// Samples whose argmax matched the target during the forward pass.
    pub correct: usize,
    /// Gradient of the mean loss.
    pub grads: Vec<F>,
}

/// Fused forward + backward over a batch of samples without retaining all
/// caches. `keys[i]` seeds sample `i`'s dropout masks. Per-sample gradients
/// are reduced in ascending order.
pub fn batch_gradients<F: Real>(
    params: &ModelParams<F>,
    inputs: &[&[F]],
    targets: &[usize],
    keys: &[u64],
    mode: DropoutMode,
    seed: u64,
    par: Parallelism,
) -> Result<BatchGradients<F>> {
    if inputs.is_empty() || inputs.len() != targets.len() || inputs.len() != keys.len() {
        bail!(Shape, "batch inputs, targets and keys must be non-empty and equally long");
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= params.config.n_classes) {
        bail!(InvalidLabel, "target class {t} out of range");
    }
    let scale = F::one() / F::of(inputs.len() as f64);
    let mut total = vec![F::zero(); params.len()];
    let mut loss = 0.0;
    let mut correct = 0;
    for start in (0..inputs.len()).step_by(GRAD_CHUNK) {
        let end = (start + GRAD_CHUNK).min(inputs.len());
        let results = par.map(end - start, |j| -> Result<(f64, bool, Vec<F>)> {
            let i = start + j;
            let ctx = DropoutCtx {
                mode,
                seed,
                key: keys[i],
            };
            let (probs, cache) = sample_forward(params, inputs[i], ctx, true)?;
            let mut g = vec![F::zero(); params.len()];
            sample_backward(params, cache.as_ref().expect("cache kept"), targets[i], scale, &mut g);
            Ok((sample_loss(&probs, targets[i]), argmax(&probs) == targets[i], g))
        });
        for r in results {
            let (l, hit, g) = r?;
            loss += l;
            correct += hit as usize;
            for (t, v) in total.iter_mut().zip(g) {
                *t += v;
            }
        }
    }
    Ok(BatchGradients {
        loss_sum: loss,
        correct,
        grads: total,
    })
}

/// Inference-mode probabilities for a list of samples, in order.
pub fn predict<F: Real>(params: &ModelParams<F>, inputs: &[&[F]], par: Parallelism) -> Result<Vec<Vec<F>>> {
    par.map(inputs.len(), |i| {
        sample_forward(params, inputs[i], DropoutCtx::inference(), false).map(|(p, _)| p)
    })
    .into_iter()
    .collect()
}
