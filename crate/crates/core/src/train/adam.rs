use crate::error::{bail, Result};
use crate::net::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            bail!(Config, "learning rate must be finite and >= 0, got {}", self.lr);
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            bail!(Config, "betas must lie in [0, 1)");
        }
        if !(self.eps > 0.0) {
            bail!(Config, "eps must be > 0, got {}", self.eps);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub hyper: AdamHyper,
    pub t: u64,
    pub m: Vec<F>,
    pub v: Vec<F>,
}

impl<F: Real> AdamState<F> {
    pub fn new(n_params: usize, hyper: AdamHyper) -> Self {
        AdamState {
            hyper,
            t: 0,
            m: vec![F::zero(); n_params],
            v: vec![F::zero(); n_params],
        }
    }
}

/// One Adam update: `m <- b1 m + (1 - b1) g`, `v <- b2 v + (1 - b2) g^2`,
/// `theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)` with bias-corrected
/// moments. Any non-finite gradient aborts before anything is modified.
pub fn adam_step<F: Real>(params: &mut [F], grads: &[F], state: &mut AdamState<F>) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        bail!(
            Shape,
            "adam: {} params, {} grads, moments {}/{}",
            params.len(),
            grads.len(),
            state.m.len(),
            state.v.len()
        );
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        bail!(Numeric, "non-finite gradient at parameter {i}");
    }
    state.t += 1;
    let h = state.hyper;
    let t = state.t as f64;
    let b1 = F::of(h.beta1);
    let b2 = F::of(h.beta2);
    let c1 = F::of(1.0 - h.beta1);
    let c2 = F::of(1.0 - h.beta2);
    let bc1 = F::of(1.0 - h.beta1.powf(t));
    let bc2 = F::of(1.0 - h.beta2.powf(t));
    let lr = F::of(h.lr);
    let eps = F::of(h.eps);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + c1 * g;
        *v = b2 * *v + c2 * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`.
pub fn clip_global_norm<F: Real>(grads: &mut [F], max_norm: f64) {
    let norm = grads.iter().map(|g| g.as_f64() * g.as_f64()).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = F::of(max_norm / norm);
        grads.iter_mut().for_each(|g| *g *= s);
    }
}
