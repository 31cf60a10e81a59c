//! Frequency statistics for symbol streams: Shannon entropy, chi-squared
//! against the uniform law, the most-common-value min-entropy estimate of
//! NIST SP 800-90B, the spread of bin counts, and sample skewness.

use serde::Serialize;
use thiserror::Error;

/// 99% two-sided normal quantile used by the MCV upper bound.
pub const MCV_Z: f64 = 2.576;

/// Smallest sample the MCV estimate accepts.
pub const MCV_MIN_SAMPLES: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("symbol {symbol} does not fit in {bits} bits")]
    SymbolOutOfRange { symbol: u32, bits: u32 },
    #[error("histogram width {0} bits is outside 1..=16")]
    InvalidWidth(u32),
    #[error("bin count {0} is not a power of two")]
    BinCount(usize),
    #[error("histogram is empty")]
    Empty,
    #[error("need at least {needed} samples, have {have}")]
    InsufficientSample { needed: u64, have: u64 },
    #[error("values have zero variance")]
    DegenerateVariance,
    #[error("need at least 3 values, have {0}")]
    TooFewValues(usize),
}

/// Occurrence counts for every value of an `n`-bit symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    bins: Vec<u64>,
    total: u64,
    bits: u32,
}

impl Histogram {
    pub fn empty(bits: u32) -> Result<Self, AnalysisError> {
        if !(1..=16).contains(&bits) {
            return Err(AnalysisError::InvalidWidth(bits));
        }
        Ok(Self {
            bins: vec![0; 1 << bits],
            total: 0,
            bits,
        })
    }

    pub fn from_symbols<I>(symbols: I, bits: u32) -> Result<Self, AnalysisError>
    where
        I: IntoIterator,
        I::Item: Into<u32>,
    {
        let mut hist = Self::empty(bits)?;
        for symbol in symbols {
            hist.record(symbol.into())?;
        }
        Ok(hist)
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut bins = vec![0u64; 256];
        for &b in bytes {
            bins[usize::from(b)] += 1;
        }
        Self {
            bins,
            total: bytes.len() as u64,
            bits: 8,
        }
    }

    /// Counts 4-bit symbols, two per byte.
    pub fn from_nibbles(bytes: &[u8]) -> Self {
        let mut bins = vec![0u64; 16];
        for &b in bytes {
            bins[usize::from(b >> 4)] += 1;
            bins[usize::from(b & 0xF)] += 1;
        }
        Self {
            bins,
            total: 2 * bytes.len() as u64,
            bits: 4,
        }
    }

    pub fn from_counts(bins: Vec<u64>) -> Result<Self, AnalysisError> {
        if bins.len() < 2 || !bins.len().is_power_of_two() || bins.len() > 1 << 16 {
            return Err(AnalysisError::BinCount(bins.len()));
        }
        let bits = bins.len().trailing_zeros();
        let total = bins.iter().sum();
        Ok(Self { bins, total, bits })
    }

    pub fn record(&mut self, symbol: u32) -> Result<(), AnalysisError> {
        let slot = self
            .bins
            .get_mut(symbol as usize)
            .ok_or(AnalysisError::SymbolOutOfRange {
                symbol,
                bits: self.bits,
            })?;
        *slot += 1;
        self.total += 1;
        Ok(())
    }

    pub fn bins(&self) -> &[u64] {
        &self.bins
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn max_count(&self) -> u64 {
        self.bins.iter().copied().max().unwrap_or(0)
    }

    fn require_nonempty(&self) -> Result<(), AnalysisError> {
        if self.total == 0 {
            Err(AnalysisError::Empty)
        } else {
            Ok(())
        }
    }
}

/// `-sum p log2 p` in bits per symbol. Empty bins contribute nothing.
pub fn shannon_entropy(hist: &Histogram) -> Result<f64, AnalysisError> {
    hist.require_nonempty()?;
    let total = hist.total as f64;
    Ok(hist
        .bins
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquared {
    pub statistic: f64,
    pub degrees_of_freedom: u32,
}

/// Pearson chi-squared against equal expected counts. Needs at least five
/// expected observations per bin.
pub fn chi_squared_uniform(hist: &Histogram) -> Result<ChiSquared, AnalysisError> {
    let needed = 5 * hist.bins.len() as u64;
    if hist.total < needed {
        return Err(AnalysisError::InsufficientSample {
            needed,
            have: hist.total,
        });
    }
    let expected = hist.total as f64 / hist.bins.len() as f64;
    let statistic = hist
        .bins
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    Ok(ChiSquared {
        statistic,
        degrees_of_freedom: hist.bins.len() as u32 - 1,
    })
}

/// Most-common-value estimate (SP 800-90B 6.3.1):
/// `p_u = min(1, p + 2.576 sqrt(p (1 - p) / L))`, returns `-log2 p_u`.
pub fn mcv_min_entropy(hist: &Histogram) -> Result<f64, AnalysisError> {
    if hist.total < MCV_MIN_SAMPLES {
        return Err(AnalysisError::InsufficientSample {
            needed: MCV_MIN_SAMPLES,
            have: hist.total,
        });
    }
    let total = hist.total as f64;
    let p = hist.max_count() as f64 / total;
    let upper = (p + MCV_Z * (p * (1.0 - p) / total).sqrt()).min(1.0);
    // -log2(1.0) is -0.0
    Ok((-upper.log2()).max(0.0))
}

/// Population standard deviation of the bin counts.
pub fn bin_sigma(hist: &Histogram) -> f64 {
    let k = hist.bins.len() as f64;
    let mean = hist.total as f64 / k;
    let var = hist
        .bins
        .iter()
        .map(|&c| {
            let d = c as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / k;
    var.sqrt()
}

/// Standardized third central moment `g1 = m3 / m2^(3/2)`.
pub fn sample_skewness(values: &[f64]) -> Result<f64, AnalysisError> {
    if values.len() < 3 {
        return Err(AnalysisError::TooFewValues(values.len()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (m2, m3) = values.iter().fold((0.0, 0.0), |(m2, m3), &v| {
        let d = v - mean;
        (m2 + d * d, m3 + d * d * d)
    });
    let (m2, m3) = (m2 / n, m3 / n);
    if m2 <= f64::EPSILON * mean.abs().max(1.0) {
        return Err(AnalysisError::DegenerateVariance);
    }
    Ok(m3 / m2.powf(1.5))
}

/// Every statistic for one stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub shannon_bits: f64,
    pub mcv_min_entropy_bits: f64,
    pub chi_squared: f64,
    pub degrees_of_freedom: u32,
    pub sigma: f64,
    pub total: u64,
    pub bits: u32,
}

impl EntropyReport {
    pub fn from_histogram(hist: &Histogram) -> Result<Self, AnalysisError> {
        let chi = chi_squared_uniform(hist)?;
        Ok(Self {
            shannon_bits: shannon_entropy(hist)?,
            mcv_min_entropy_bits: mcv_min_entropy(hist)?,
            chi_squared: chi.statistic,
            degrees_of_freedom: chi.degrees_of_freedom,
            sigma: bin_sigma(hist),
            total: hist.total,
            bits: hist.bits,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, AnalysisError> {
        Self::from_histogram(&Histogram::from_bytes(bytes))
    }
}
