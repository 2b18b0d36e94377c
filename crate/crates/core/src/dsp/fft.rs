//! Iterative radix-2 decimation-in-time FFT with precomputed tables.

use crate::error::{bail, Result};

#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    bitrev: Vec<usize>,
    /// `e^{-2 pi i k / n}` for `k < n/2`.
    twiddle_re: Vec<f64>,
    twiddle_im: Vec<f64>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            bail!(InvalidArg, "FFT length must be a power of two >= 2, got {n}");
        }
        let bits = n.trailing_zeros();
        let bitrev = (0..n)
            .map(|i| i.reverse_bits() >> (usize::BITS - bits))
            .collect();
        let (twiddle_re, twiddle_im) = (0..n / 2)
            .map(|k| {
                let theta = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
                (theta.cos(), theta.sin())
            })
            .unzip();
        Ok(FftPlan {
            n,
            bitrev,
            twiddle_re,
            twiddle_im,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// In-place forward transform `X_k = sum_n x_n e^{-2 pi i k n / N}`.
    pub fn forward(&self, re: &mut [f64], im: &mut [f64]) -> Result<()> {
        if re.len() != self.n || im.len() != self.n {
            bail!(InvalidArg, "FFT input length {} / {} != {}", re.len(), im.len(), self.n);
        }
        for i in 0..self.n {
            let j = self.bitrev[i];
            if j > i {
                re.swap(i, j);
                im.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= self.n {
            let half = size / 2;
            let stride = self.n / size;
            for start in (0..self.n).step_by(size) {
                for k in 0..half {
                    let (wr, wi) = (self.twiddle_re[k * stride], self.twiddle_im[k * stride]);
                    let (a, b) = (start + k, start + k + half);
                    let tr = re[b] * wr - im[b] * wi;
                    let ti = re[b] * wi + im[b] * wr;
                    re[b] = re[a] - tr;
                    im[b] = im[a] - ti;
                    re[a] += tr;
                    im[a] += ti;
                }
            }
            size *= 2;
        }
        Ok(())
    }

    /// Transform of a real frame; returns (re, im) of the full spectrum.
    pub fn real_forward(&self, frame: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut re = frame.to_vec();
        let mut im = vec![0.0; frame.len()];
        self.forward(&mut re, &mut im)?;
        Ok((re, im))
    }
}
