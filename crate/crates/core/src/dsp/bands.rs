use std::fmt;
use std::ops::RangeInclusive;

use crate::dsp::spectrum::Spectrum;
use crate::error::{bail, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub name: String,
    pub low_hz: f64,
    pub high_hz: f64,
}

/// Whether a band's upper edge is included in its bin range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpperEdge {
    Open,
    Closed,
}

/// Ascending frequency bands. Every band is half-open `[low, high)` except
/// the last, which also includes its upper edge.
#[derive(Debug, Clone, PartialEq)]
pub struct BandTable {
    bands: Vec<Band>,
}

impl Default for BandTable {
    fn default() -> Self {
        let b = |name: &str, low_hz, high_hz| Band {
            name: name.to_string(),
            low_hz,
            high_hz,
        };
        BandTable {
            bands: vec![
                b("theta", 4.0, 8.0),
                b("alpha", 8.0, 12.0),
                b("low_beta", 12.0, 16.0),
                b("high_beta", 16.0, 30.0),
                b("gamma", 30.0, 45.0),
            ],
        }
    }
}

impl BandTable {
    pub fn new(bands: Vec<Band>) -> Result<Self> {
        if bands.is_empty() {
            bail!(Config, "band table is empty");
        }
        for (i, b) in bands.iter().enumerate() {
            if !(b.low_hz > 0.0 && b.low_hz < b.high_hz && b.high_hz.is_finite()) {
                bail!(Config, "band {} must satisfy 0 < low < high", b.name);
            }
            if i > 0 && b.low_hz < bands[i - 1].high_hz {
                bail!(Config, "band {} overlaps or precedes {}", b.name, bands[i - 1].name);
            }
        }
        Ok(BandTable { bands })
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn len(&self) -> usize {
        self.bands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bands.is_empty()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bands.iter().map(|b| 0.5 * (b.low_hz + b.high_hz)).collect()
    }

    fn edge(&self, i: usize) -> UpperEdge {
        if i + 1 == self.bands.len() {
            UpperEdge::Closed
        } else {
            UpperEdge::Open
        }
    }

    /// Inclusive bin ranges of each band for a given resolution.
    pub fn bin_ranges(&self, bin_hz: f64, n_bins: usize) -> Result<Vec<RangeInclusive<usize>>> {
        self.bands
            .iter()
            .enumerate()
            .map(|(i, b)| band_bins(b.low_hz, b.high_hz, self.edge(i), bin_hz, n_bins))
            .collect()
    }

    /// Band powers of one spectrum, in table order.
    pub fn powers(&self, s: &Spectrum) -> Result<Vec<f64>> {
        self.bands
            .iter()
            .enumerate()
            .map(|(i, b)| band_power(s, b.low_hz, b.high_hz, self.edge(i)))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bands = text
            .split(',')
            .map(|entry| {
                let parts: Vec<&str> = entry.trim().split(':').collect();
                let num = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad band frequency {s:?}")))
                };
                match parts.as_slice() {
                    [name, low, high] => Ok(Band {
                        name: name.trim().to_string(),
                        low_hz: num(low)?,
                        high_hz: num(high)?,
                    }),
                    _ => Err(Error::Config(format!(
                        "band entry {entry:?} must be name:low:high"
                    ))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        BandTable::new(bands)
    }
}

impl fmt::Display for BandTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .bands
            .iter()
            .map(|b| format!("{}:{}:{}", b.name, b.low_hz, b.high_hz))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// Bins `k` with `low <= k * bin_hz < high` (or `<= high` when closed).
pub fn band_bins(
    low_hz: f64,
    high_hz: f64,
    edge: UpperEdge,
    bin_hz: f64,
    n_bins: usize,
) -> Result<RangeInclusive<usize>> {
    let nyquist = (n_bins - 1) as f64 * bin_hz;
    if !(low_hz >= 0.0 && low_hz < high_hz && high_hz <= nyquist) {
        bail!(
            InvalidArg,
            "band [{low_hz}, {high_hz}] Hz must lie within [0, {nyquist}] Hz"
        );
    }
    let first = (low_hz / bin_hz).ceil() as usize;
    let ratio = high_hz / bin_hz;
    let last = match edge {
        UpperEdge::Closed => ratio.floor() as usize,
        UpperEdge::Open => ratio.ceil() as usize - 1,
    };
    if last < first {
        bail!(InvalidArg, "band [{low_hz}, {high_hz}] Hz contains no bins");
    }
    Ok(first..=last)
}

pub fn band_power(s: &Spectrum, low_hz: f64, high_hz: f64, edge: UpperEdge) -> Result<f64> {
    let bins = band_bins(low_hz, high_hz, edge, s.bin_hz, s.power.len())?;
    Ok(s.power[bins].iter().sum())
}
