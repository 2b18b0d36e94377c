//! Dense layers, activations, and inverted dropout.

use std::fmt;
use std::str::FromStr;

use crate::error::{bail, Error, Result};
use crate::net::real::Real;
use crate::rng::Prng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Softmax,
}

/// `act(x W + b)` with `W` of shape `(x.len(), b.len())`.
pub fn dense<F: Real>(x: &[F], w: &[F], b: &[F], act: Activation) -> Result<Vec<F>> {
    if w.len() != x.len() * b.len() {
        bail!(Shape, "dense kernel of {} values for input {} / output {}", w.len(), x.len(), b.len());
    }
    let mut z = affine(x, w, b);
    match act {
        Activation::Identity => {}
        Activation::Relu => relu_in_place(&mut z),
        Activation::Softmax => z = softmax(&z),
    }
    Ok(z)
}

pub(crate) fn affine<F: Real>(x: &[F], w: &[F], b: &[F]) -> Vec<F> {
    let cols = b.len();
    let mut z = b.to_vec();
    for (k, &xk) in x.iter().enumerate() {
        let row = &w[k * cols..(k + 1) * cols];
        for (o, &r) in z.iter_mut().zip(row) {
            *o += xk * r;
        }
    }
    z
}

pub fn relu_in_place<F: Real>(z: &mut [F]) {
    for v in z {
        if *v < F::zero() {
            *v = F::zero();
        }
    }
}

/// Numerically stable softmax (max-shifted).
pub fn softmax<F: Real>(z: &[F]) -> Vec<F> {
    let max = z.iter().copied().fold(F::neg_infinity(), F::max);
    let e: Vec<F> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: F = e.iter().copied().sum();
    e.into_iter().map(|v| v / sum).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Train,
    Inference,
}

impl FromStr for DropoutMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(DropoutMode::Train),
            "inference" => Ok(DropoutMode::Inference),
            other => Err(Error::Config(format!("dropout mode must be train or inference, got {other:?}"))),
        }
    }
}

impl fmt::Display for DropoutMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropoutMode::Train => "train",
            DropoutMode::Inference => "inference",
        })
    }
}

/// Inverted-dropout multipliers: `0` with probability `rate`, otherwise
/// `1 / (1 - rate)`. Element `k` is dropped when the stream's `k`-th
/// uniform draw is below `rate`.
pub fn dropout_mask<F: Real>(len: usize, rate: f64, rng: &mut Prng) -> Result<Vec<F>> {
    if !(0.0..1.0).contains(&rate) {
        bail!(InvalidArg, "dropout rate {rate} outside [0, 1)");
    }
    let keep = F::of(1.0 / (1.0 - rate));
    Ok((0..len)
        .map(|_| if rng.uniform() < rate { F::zero() } else { keep })
        .collect())
}

/// Applies dropout to `x`. Inference mode and rate 0 are the identity.
pub fn dropout<F: Real>(x: &[F], rate: f64, mode: DropoutMode, seed: u64) -> Result<Vec<F>> {
    if !(0.0..1.0).contains(&rate) {
        bail!(InvalidArg, "dropout rate {rate} outside [0, 1)");
    }
    if mode == DropoutMode::Inference || rate == 0.0 {
        return Ok(x.to_vec());
    }
    let mask = dropout_mask::<F>(x.len(), rate, &mut Prng::new(seed))?;
    Ok(x.iter().zip(&mask).map(|(&v, &m)| v * m).collect())
}
