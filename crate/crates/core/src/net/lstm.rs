//! LSTM cell, layer forward, and backpropagation through time.
//!
//! Per step, with gate columns in (i, f, g, o) order:
//! `z = x W + h_prev U + b`, `i = sig(z_i)`, `f = sig(z_f)`, `g = tanh(z_g)`,
//! `o = sig(z_o)`, `c = f * c_prev + i * g`, `h = o * tanh(c)`.

use crate::error::{bail, Result};
use crate::net::real::{sigmoid, Real};

/// Borrowed weights of one LSTM.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a, F> {
    pub input_dim: usize,
    pub hidden: usize,
    /// `(input_dim, 4 * hidden)`.
    pub w: &'a [F],
    /// `(hidden, 4 * hidden)`.
    pub u: &'a [F],
    /// `(4 * hidden)`.
    pub b: &'a [F],
}

impl<'a, F: Real> LstmWeights<'a, F> {
    pub fn new(input_dim: usize, hidden: usize, w: &'a [F], u: &'a [F], b: &'a [F]) -> Result<Self> {
        let h4 = 4 * hidden;
        if w.len() != input_dim * h4 || u.len() != hidden * h4 || b.len() != h4 {
            bail!(
                Shape,
                "LSTM weights ({}, {}, {}) do not match input {input_dim}, hidden {hidden}",
                w.len(),
                u.len(),
                b.len()
            );
        }
        Ok(LstmWeights {
            input_dim,
            hidden,
            w,
            u,
            b,
        })
    }
}

/// Mutable gradient views congruent with [`LstmWeights`].
pub struct LstmGrads<'a, F> {
    pub w: &'a mut [F],
    pub u: &'a mut [F],
    pub b: &'a mut [F],
}

/// Adds `x * m` (row vector times row-major matrix) into `out`.
fn add_vec_mat<F: Real>(out: &mut [F], x: &[F], m: &[F]) {
    let cols = out.len();
    for (k, &xk) in x.iter().enumerate() {
        if xk == F::zero() {
            continue;
        }
        let row = &m[k * cols..(k + 1) * cols];
        for (o, &r) in out.iter_mut().zip(row) {
            *o += xk * r;
        }
    }
}

/// `out[k] = sum_j m[k, j] * dz[j]` (matrix times column vector).
fn mat_vec<F: Real>(out: &mut [F], m: &[F], dz: &[F]) {
    let cols = dz.len();
    for (k, o) in out.iter_mut().enumerate() {
        let row = &m[k * cols..(k + 1) * cols];
        let mut acc = F::zero();
        for (&r, &d) in row.iter().zip(dz) {
            acc += r * d;
        }
        *o = acc;
    }
}

/// Accumulates the outer product `x^T dz` into a row-major gradient.
fn add_outer<F: Real>(grad: &mut [F], x: &[F], dz: &[F]) {
    let cols = dz.len();
    for (k, &xk) in x.iter().enumerate() {
        if xk == F::zero() {
            continue;
        }
        let row = &mut grad[k * cols..(k + 1) * cols];
        for (g, &d) in row.iter_mut().zip(dz) {
            *g += xk * d;
        }
    }
}

/// One cell step. Writes the activated gates `(i, f, g, o)` into `gates`
/// and the new state into `c` and `h`.
pub fn lstm_cell_forward<F: Real>(
    p: &LstmWeights<'_, F>,
    x: &[F],
    h_prev: &[F],
    c_prev: &[F],
    gates: &mut [F],
    c: &mut [F],
    h: &mut [F],
) -> Result<()> {
    let hd = p.hidden;
    if x.len() != p.input_dim
        || h_prev.len() != hd
        || c_prev.len() != hd
        || gates.len() != 4 * hd
        || c.len() != hd
        || h.len() != hd
    {
        bail!(Shape, "LSTM cell buffers do not match input {} / hidden {hd}", p.input_dim);
    }
    cell_step(p, x, h_prev, c_prev, gates, c, h);
    Ok(())
}

fn cell_step<F: Real>(
    p: &LstmWeights<'_, F>,
    x: &[F],
    h_prev: &[F],
    c_prev: &[F],
    gates: &mut [F],
    c: &mut [F],
    h: &mut [F],
) {
    let hd = p.hidden;
    gates.copy_from_slice(p.b);
    add_vec_mat(gates, x, p.w);
    add_vec_mat(gates, h_prev, p.u);
    for j in 0..hd {
        let i = sigmoid(gates[j]);
        let f = sigmoid(gates[hd + j]);
        let g = gates[2 * hd + j].tanh();
        let o = sigmoid(gates[3 * hd + j]);
        gates[j] = i;
        gates[hd + j] = f;
        gates[2 * hd + j] = g;
        gates[3 * hd + j] = o;
        c[j] = f * c_prev[j] + i * g;
        h[j] = o * c[j].tanh();
    }
}

/// Everything the backward pass needs from one layer run. All per-step
/// buffers are indexed by original time order, whichever the direction.
#[derive(Debug, Clone)]
pub struct LstmTrace<F> {
    pub steps: usize,
    pub hidden: usize,
    pub reverse: bool,
    /// `(T, 4 * hidden)` activated gates.
    pub gates: Vec<F>,
    /// `(T, hidden)` cell states.
    pub c: Vec<F>,
    /// `(T, hidden)` outputs.
    pub h: Vec<F>,
}

impl<F: Real> LstmTrace<F> {
    pub fn h_at(&self, t: usize) -> &[F] {
        &self.h[t * self.hidden..(t + 1) * self.hidden]
    }

    pub fn last_output(&self) -> &[F] {
        let t = if self.reverse { 0 } else { self.steps - 1 };
        self.h_at(t)
    }
}

fn step_order(steps: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
    if reverse {
        Box::new((0..steps).rev())
    } else {
        Box::new(0..steps)
    }
}

/// Runs the layer over `xs` (`(T, input_dim)`), from a zero state. With
/// `reverse`, steps are visited last to first and outputs stay aligned to
/// the original time index.
pub fn lstm_layer_forward<F: Real>(
    p: &LstmWeights<'_, F>,
    xs: &[F],
    reverse: bool,
) -> Result<LstmTrace<F>> {
    if xs.is_empty() || !xs.len().is_multiple_of(p.input_dim) {
        bail!(
            InvalidArg,
            "LSTM input of {} values is empty or not a multiple of {}",
            xs.len(),
            p.input_dim
        );
    }
    let steps = xs.len() / p.input_dim;
    let hd = p.hidden;
    let mut trace = LstmTrace {
        steps,
        hidden: hd,
        reverse,
        gates: vec![F::zero(); steps * 4 * hd],
        c: vec![F::zero(); steps * hd],
        h: vec![F::zero(); steps * hd],
    };
    let zeros = vec![F::zero(); hd];
    let mut prev: Option<usize> = None;
    let mut c_buf = vec![F::zero(); hd];
    let mut h_buf = vec![F::zero(); hd];
    for t in step_order(steps, reverse) {
        let (h_prev, c_prev) = match prev {
            Some(pt) => (&trace.h[pt * hd..(pt + 1) * hd], &trace.c[pt * hd..(pt + 1) * hd]),
            None => (&zeros[..], &zeros[..]),
        };
        let x = &xs[t * p.input_dim..(t + 1) * p.input_dim];
        let gates = &mut trace.gates[t * 4 * hd..(t + 1) * 4 * hd];
        cell_step(p, x, h_prev, c_prev, gates, &mut c_buf, &mut h_buf);
        trace.c[t * hd..(t + 1) * hd].copy_from_slice(&c_buf);
        trace.h[t * hd..(t + 1) * hd].copy_from_slice(&h_buf);
        prev = Some(t);
    }
    Ok(trace)
}

/// Convenience wrapper returning the full sequence `(T, hidden)` or, when
/// `return_sequences` is false, the final step's output `(hidden)`.
pub fn lstm_layer_output<F: Real>(
    p: &LstmWeights<'_, F>,
    xs: &[F],
    reverse: bool,
    return_sequences: bool,
) -> Result<Vec<F>> {
    let trace = lstm_layer_forward(p, xs, reverse)?;
    Ok(if return_sequences {
        trace.h
    } else {
        trace.last_output().to_vec()
    })
}

/// Concatenates forward and backward outputs per step: `(T, 2 * hidden)`.
pub fn bilstm_forward<F: Real>(
    xs: &[F],
    fwd: &LstmWeights<'_, F>,
    bwd: &LstmWeights<'_, F>,
) -> Result<Vec<F>> {
    if fwd.hidden != bwd.hidden || fwd.input_dim != bwd.input_dim {
        bail!(Shape, "bidirectional halves differ in shape");
    }
    let f = lstm_layer_forward(fwd, xs, false)?;
    let b = lstm_layer_forward(bwd, xs, true)?;
    Ok(concat_steps(&f, &b))
}

pub fn concat_steps<F: Real>(f: &LstmTrace<F>, b: &LstmTrace<F>) -> Vec<F> {
    let mut out = Vec::with_capacity(f.h.len() + b.h.len());
    for t in 0..f.steps {
        out.extend_from_slice(f.h_at(t));
        out.extend_from_slice(b.h_at(t));
    }
    out
}

/// Backpropagates `dh` (`(T, hidden)`, gradient of the loss with respect to
/// each step's output) through the layer. Parameter gradients are added
/// into `grads`; the input gradient `(T, input_dim)` is written into `dxs`
/// when given.
pub fn lstm_layer_backward<F: Real>(
    p: &LstmWeights<'_, F>,
    xs: &[F],
    trace: &LstmTrace<F>,
    dh: &[F],
    grads: &mut LstmGrads<'_, F>,
    mut dxs: Option<&mut [F]>,
) {
    let hd = p.hidden;
    let steps = trace.steps;
    let mut dh_next = vec![F::zero(); hd];
    let mut dc_next = vec![F::zero(); hd];
    let mut dz = vec![F::zero(); 4 * hd];
    let zeros = vec![F::zero(); hd];
    let one = F::one();
    // Visit steps in the reverse of the forward order.
    for t in step_order(steps, !trace.reverse) {
        let prev = if trace.reverse {
            (t + 1 < steps).then_some(t + 1)
        } else {
            t.checked_sub(1)
        };
        let (h_prev, c_prev) = match prev {
            Some(pt) => (&trace.h[pt * hd..(pt + 1) * hd], &trace.c[pt * hd..(pt + 1) * hd]),
            None => (&zeros[..], &zeros[..]),
        };
        let gates = &trace.gates[t * 4 * hd..(t + 1) * 4 * hd];
        let c = &trace.c[t * hd..(t + 1) * hd];
        for j in 0..hd {
            let (i, f, g, o) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
            let tc = c[j].tanh();
            let dhj = dh[t * hd + j] + dh_next[j];
            let d_o = dhj * tc;
            let dc = dc_next[j] + dhj * o * (one - tc * tc);
            dz[j] = dc * g * i * (one - i);
            dz[hd + j] = dc * c_prev[j] * f * (one - f);
            dz[2 * hd + j] = dc * i * (one - g * g);
            dz[3 * hd + j] = d_o * o * (one - o);
            dc_next[j] = dc * f;
        }
        let x = &xs[t * p.input_dim..(t + 1) * p.input_dim];
        for (gb, &d) in grads.b.iter_mut().zip(&dz) {
            *gb += d;
        }
        add_outer(grads.w, x, &dz);
        add_outer(grads.u, h_prev, &dz);
        if let Some(dxs) = dxs.as_deref_mut() {
            mat_vec(&mut dxs[t * p.input_dim..(t + 1) * p.input_dim], p.w, &dz);
        }
        mat_vec(&mut dh_next, p.u, &dz);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeros(n: usize) -> Vec<f64> {
        vec![0.0; n]
    }

    #[test]
    fn zero_params_zero_state() {
        let (w, u, b) = (zeros(3 * 8), zeros(16), zeros(8));
        let p = LstmWeights::new(3, 2, &w, &u, &b).unwrap();
        let (mut g, mut c, mut h) = (zeros(8), zeros(2), zeros(2));
        lstm_cell_forward(&p, &[1.0, -2.0, 0.5], &zeros(2), &zeros(2), &mut g, &mut c, &mut h).unwrap();
        assert_eq!(&g, &[0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5]);
        assert_eq!((c.clone(), h.clone()), (zeros(2), zeros(2)));
    }

    #[test]
    fn forget_bias_closed_form() {
        // Independent scalar evaluation: f = 1 / (1 + e^-1), c = f * 1,
        // h = 0.5 * tanh(c), evaluated once and frozen here.
        let (w, u) = (zeros(4), zeros(4));
        let b = vec![0.0, 1.0, 0.0, 0.0];
        let p = LstmWeights::new(1, 1, &w, &u, &b).unwrap();
        let (mut g, mut c, mut h) = (zeros(4), zeros(1), zeros(1));
        lstm_cell_forward(&p, &[0.0], &[0.0], &[1.0], &mut g, &mut c, &mut h).unwrap();
        assert!((c[0] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!((h[0] - 0.311_856_274_912_937_8).abs() < 1e-12);
    }

    #[test]
    fn saturated_gates_stay_bounded() {
        let (w, u) = (zeros(4), zeros(4));
        let b = vec![30.0, 0.0, 30.0, 30.0];
        let p = LstmWeights::new(1, 1, &w, &u, &b).unwrap();
        let (mut g, mut c, mut h) = (zeros(4), zeros(1), zeros(1));
        lstm_cell_forward(&p, &[0.0], &[0.0], &[0.0], &mut g, &mut c, &mut h).unwrap();
        assert!(h[0] > 0.0 && h[0] < 1.0);
        assert!((h[0] - 1f64.tanh()).abs() < 1e-9);
    }

    #[test]
    fn cell_shape_mismatch() {
        let (w, u, b) = (zeros(8), zeros(16), zeros(8));
        let p = LstmWeights::new(1, 2, &w, &u, &b).unwrap();
        let (mut g, mut c, mut h) = (zeros(8), zeros(2), zeros(2));
        assert!(lstm_cell_forward(&p, &[0.0, 1.0], &zeros(2), &zeros(2), &mut g, &mut c, &mut h).is_err());
        assert!(LstmWeights::new(2, 2, &w, &u, &b).is_err());
    }

    fn random_weights(input_dim: usize, hidden: usize, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut rng = crate::rng::Prng::new(seed);
        let mut draw = |n: usize| (0..n).map(|_| rng.uniform() - 0.5).collect::<Vec<_>>();
        (draw(input_dim * 4 * hidden), draw(hidden * 4 * hidden), draw(4 * hidden))
    }

    #[test]
    fn single_step_equals_cell() {
        let (w, u, b) = random_weights(2, 3, 1);
        let p = LstmWeights::new(2, 3, &w, &u, &b).unwrap();
        let x = [0.3, -0.7];
        let out = lstm_layer_output(&p, &x, false, true).unwrap();
        let (mut g, mut c, mut h) = (zeros(12), zeros(3), zeros(3));
        lstm_cell_forward(&p, &x, &zeros(3), &zeros(3), &mut g, &mut c, &mut h).unwrap();
        assert_eq!(out, h);
        assert!(lstm_layer_forward(&p, &[], false).is_err());
    }

    #[test]
    fn reverse_on_palindrome_mirrors_forward() {
        let (w, u, b) = random_weights(1, 4, 2);
        let p = LstmWeights::new(1, 4, &w, &u, &b).unwrap();
        let xs = [0.2, -1.0, 0.7, -1.0, 0.2];
        let f = lstm_layer_forward(&p, &xs, false).unwrap();
        let r = lstm_layer_forward(&p, &xs, true).unwrap();
        for t in 0..5 {
            assert_eq!(f.h_at(t), r.h_at(4 - t));
        }
        assert_eq!(f.last_output(), r.last_output());
    }

    #[test]
    fn bilstm_width_and_forward_half() {
        let (w, u, b) = random_weights(2, 3, 3);
        let (w2, u2, b2) = random_weights(2, 3, 4);
        let f = LstmWeights::new(2, 3, &w, &u, &b).unwrap();
        let bw = LstmWeights::new(2, 3, &w2, &u2, &b2).unwrap();
        let xs = [0.1, 0.2, 0.3, 0.4, -0.5, 0.6];
        let out = bilstm_forward(&xs, &f, &bw).unwrap();
        assert_eq!(out.len(), 3 * 6);
        let fwd = lstm_layer_output(&f, &xs, false, true).unwrap();
        for t in 0..3 {
            assert_eq!(&out[t * 6..t * 6 + 3], &fwd[t * 3..t * 3 + 3]);
        }
        let other = LstmWeights::new(2, 2, &w2[..16], &u2[..16], &b2[..8]).unwrap();
        assert!(bilstm_forward(&xs, &f, &other).is_err());
    }

    #[test]
    fn zero_params_bilstm_is_zero() {
        let (w, u, b) = (zeros(128 * 4), zeros(128 * 512), zeros(512));
        let p = LstmWeights::new(1, 128, &w, &u, &b).unwrap();
        let out = bilstm_forward(&[1.0, 2.0, 3.0], &p, &p).unwrap();
        assert_eq!(out.len(), 3 * 256);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn outputs_are_bounded() {
        let (mut w, u, b) = random_weights(1, 5, 9);
        w.iter_mut().for_each(|v| *v *= 50.0);
        let p = LstmWeights::new(1, 5, &w, &u, &b).unwrap();
        let xs: Vec<f64> = (0..40).map(|i| (i as f64 * 1.3).sin() * 100.0).collect();
        let tr = lstm_layer_forward(&p, &xs, false).unwrap();
        assert!(tr.h.iter().all(|v| v.abs() <= 1.0));
        assert!(tr.c.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn layer_backward_matches_finite_differences() {
        let (input_dim, hidden, steps) = (2, 3, 4);
        let (w, u, b) = random_weights(input_dim, hidden, 5);
        let mut rng = crate::rng::Prng::new(6);
        let xs: Vec<f64> = (0..steps * input_dim).map(|_| rng.normal()).collect();
        let coef: Vec<f64> = (0..steps * hidden).map(|_| rng.normal()).collect();
        for reverse in [false, true] {
            // Loss = sum(coef * h).
            let loss = |w: &[f64], u: &[f64], b: &[f64], xs: &[f64]| {
                let p = LstmWeights::new(input_dim, hidden, w, u, b).unwrap();
                let tr = lstm_layer_forward(&p, xs, reverse).unwrap();
                tr.h.iter().zip(&coef).map(|(h, c)| h * c).sum::<f64>()
            };
            let p = LstmWeights::new(input_dim, hidden, &w, &u, &b).unwrap();
            let tr = lstm_layer_forward(&p, &xs, reverse).unwrap();
            let (mut gw, mut gu, mut gb) = (zeros(w.len()), zeros(u.len()), zeros(b.len()));
            let mut dx = zeros(xs.len());
            lstm_layer_backward(
                &p,
                &xs,
                &tr,
                &coef,
                &mut LstmGrads { w: &mut gw, u: &mut gu, b: &mut gb },
                Some(&mut dx),
            );
            let h = 1e-6;
            let check = |analytic: &[f64], which: usize| {
                for k in 0..analytic.len() {
                    let mut bufs = [w.clone(), u.clone(), b.clone(), xs.clone()];
                    bufs[which][k] += h;
                    let lp = loss(&bufs[0], &bufs[1], &bufs[2], &bufs[3]);
                    bufs[which][k] -= 2.0 * h;
                    let lm = loss(&bufs[0], &bufs[1], &bufs[2], &bufs[3]);
                    let numeric = (lp - lm) / (2.0 * h);
                    assert!((numeric - analytic[k]).abs() < 1e-7, "buf {which} idx {k}: {numeric} vs {}", analytic[k]);
                }
            };
            check(&gw, 0);
            check(&gu, 1);
            check(&gb, 2);
            check(&dx, 3);
        }
    }
}
