//! Multinomial probability of a binned citation record and the
//! unlikelihood measure `r`.
//!
//! A record `{n_i}` of `N` papers drawn independently from a citation
//! distribution `P(i)` has probability
//!
//! ```text
//! P({n_i}) = N! · Π_i P(i)^{n_i} / n_i!
//! ```
//!
//! and `r = log10 P({n_i}_max) − log10 P({n_i})`, where the reference
//! configuration is `n_i = N·P(i)` evaluated with `Γ(n + 1)` in place of
//! `n!`. Everything is computed in log10 space so records with thousands of
//! papers stay finite.

use serde::{Deserialize, Serialize};

use crate::corpus::BinnedRecord;
use crate::special::log10_factorial;
use crate::{Error, Result};

/// Accepted deviation of `Σ P(i)` from one when constructing a distribution.
pub const SUM_TOLERANCE: f64 = 1e-3;

/// Citation-bin probabilities for the SPIRES high-energy-physics corpus.
/// The column sums to 0.99984 and is kept unnormalized.
pub const TABLE1_PROBABILITIES: [f64; 6] = [0.267, 0.444, 0.224, 0.0380, 0.0250, 0.00184];

/// Probabilities `P(i)` over citation bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CitationDistribution {
    probabilities: Vec<f64>,
}

impl CitationDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidDistribution("no bins".into()));
        }
        if let Some((i, p)) = probabilities
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "P({i}) = {p} is not a non-negative number"
            )));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {sum}"
            )));
        }
        Ok(Self { probabilities })
    }

    /// Builds a distribution from non-negative weights, normalizing them.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if !sum.is_finite() || sum <= 0.0 {
            return Err(Error::InvalidDistribution(format!("weights sum to {sum}")));
        }
        Self::new(weights.iter().map(|w| w / sum).collect())
    }

    /// The SPIRES column as is, summing to 0.99984.
    pub fn table1() -> Self {
        Self {
            probabilities: TABLE1_PROBABILITIES.to_vec(),
        }
    }

    /// A copy scaled to sum to exactly one (up to rounding).
    pub fn renormalized(&self) -> Self {
        let sum: f64 = self.probabilities.iter().sum();
        Self {
            probabilities: self.probabilities.iter().map(|p| p / sum).collect(),
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn num_bins(&self) -> usize {
        self.probabilities.len()
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// Expected bin index `Σ i·P(i)`.
    pub fn mean_bin(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(i, p)| i as f64 * p)
            .sum()
    }
}

impl TryFrom<Vec<f64>> for CitationDistribution {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<CitationDistribution> for Vec<f64> {
    fn from(value: CitationDistribution) -> Self {
        value.probabilities
    }
}

/// The unlikelihood of a record together with the two log-probabilities it
/// was formed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Unlikelihood {
    pub r: f64,
    pub log10_record: f64,
    pub log10_max: f64,
}

fn check_dims(binned: &BinnedRecord, dist: &CitationDistribution) -> Result<()> {
    if binned.counts().len() != dist.num_bins() {
        return Err(Error::DimensionMismatch {
            expected: dist.num_bins(),
            actual: binned.counts().len(),
        });
    }
    Ok(())
}

/// `Σ_i n_i · log10 P(i)`, without the multinomial coefficient.
pub(crate) fn log10_kernel(counts: &[u64], probabilities: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (bin, (&n, &p)) in counts.iter().zip(probabilities).enumerate() {
        if n == 0 {
            continue;
        }
        if p == 0.0 {
            return Err(Error::OutsideSupport { bin, count: n });
        }
        acc += n as f64 * p.log10();
    }
    Ok(acc)
}

/// log10 of the multinomial probability of `binned` under `dist`.
pub fn log_record_probability(binned: &BinnedRecord, dist: &CitationDistribution) -> Result<f64> {
    check_dims(binned, dist)?;
    let counts = binned.counts();
    let kernel = log10_kernel(counts, dist.probabilities())?;
    let coefficient = log10_factorial(binned.total() as f64)
        - counts
            .iter()
            .map(|&n| log10_factorial(n as f64))
            .sum::<f64>();
    Ok(coefficient + kernel)
}

/// log10 of the reference probability at `n_i = N·P(i)`, with factorials
/// continued through the Gamma function. Zero for `N = 0`.
pub fn log_max_probability(n: u64, dist: &CitationDistribution) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let body: f64 = dist
        .probabilities()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let expected = n * p;
            expected * p.log10() - log10_factorial(expected)
        })
        .sum();
    log10_factorial(n) + body
}

pub fn unlikelihood_r(binned: &BinnedRecord, dist: &CitationDistribution) -> Result<Unlikelihood> {
    let log10_record = log_record_probability(binned, dist)?;
    let log10_max = log_max_probability(binned.total(), dist);
    Ok(Unlikelihood {
        r: log10_max - log10_record,
        log10_record,
        log10_max,
    })
}
