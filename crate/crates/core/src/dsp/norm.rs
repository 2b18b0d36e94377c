use crate::error::{bail, Result};

pub const STD_FLOOR: f64 = 1e-8;

/// Per-feature z-score statistics. `std` is the population standard
/// deviation, floored at [`STD_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Fits statistics over the rows of a row-major `(n, dim)` matrix selected
/// by `rows`.
pub fn zscore_fit(values: &[f32], dim: usize, rows: &[usize]) -> Result<NormStats> {
    if rows.len() < 2 {
        bail!(TooFewSamples, "z-score fit needs at least 2 samples, got {}", rows.len());
    }
    if dim == 0 || !values.len().is_multiple_of(dim) {
        bail!(Shape, "feature buffer of {} values is not a multiple of dim {dim}", values.len());
    }
    let n_rows = values.len() / dim;
    if let Some(&r) = rows.iter().find(|&&r| r >= n_rows) {
        bail!(Shape, "row {r} out of range for {n_rows} rows");
    }
    let row = |r: usize| &values[r * dim..(r + 1) * dim];
    let n = rows.len() as f64;
    let mut mean = vec![0.0f64; dim];
    for &r in rows {
        for (m, &x) in mean.iter_mut().zip(row(r)) {
            *m += x as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0f64; dim];
    for &r in rows {
        for ((v, &x), m) in var.iter_mut().zip(row(r)).zip(&mean) {
            let d = x as f64 - m;
            *v += d * d;
        }
    }
    let std = var.into_iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
    Ok(NormStats { mean, std })
}

pub fn zscore_apply_in_place(values: &mut [f32], stats: &NormStats) -> Result<()> {
    let dim = stats.dim();
    if dim == 0 || !values.len().is_multiple_of(dim) || stats.std.len() != dim {
        bail!(
            Shape,
            "feature buffer of {} values does not match stats of length {dim}",
            values.len()
        );
    }
    for row in values.chunks_exact_mut(dim) {
        for ((x, m), s) in row.iter_mut().zip(&stats.mean).zip(&stats.std) {
            *x = ((*x as f64 - m) / s) as f32;
        }
    }
    Ok(())
}

pub fn zscore_apply(values: &[f32], stats: &NormStats) -> Result<Vec<f32>> {
    let mut out = values.to_vec();
    zscore_apply_in_place(&mut out, stats)?;
    Ok(out)
}
