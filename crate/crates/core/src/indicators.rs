//! Scalar author-quality indicators computed from a citation record.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::CitationRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    MeanCitations,
    MedianCitations,
    TotalCitations,
    MaxCitations,
    HIndex,
    PapersPerYear,
}

impl IndicatorKind {
    pub const ALL: [IndicatorKind; 6] = [
        IndicatorKind::MeanCitations,
        IndicatorKind::MedianCitations,
        IndicatorKind::TotalCitations,
        IndicatorKind::MaxCitations,
        IndicatorKind::HIndex,
        IndicatorKind::PapersPerYear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IndicatorKind::MeanCitations => "mean_citations",
            IndicatorKind::MedianCitations => "median_citations",
            IndicatorKind::TotalCitations => "total_citations",
            IndicatorKind::MaxCitations => "max_citations",
            IndicatorKind::HIndex => "h_index",
            IndicatorKind::PapersPerYear => "papers_per_year",
        }
    }
}

impl fmt::Display for IndicatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IndicatorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        IndicatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown indicator `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorValue {
    pub kind: IndicatorKind,
    pub value: f64,
}

pub fn evaluate(kind: IndicatorKind, record: &CitationRecord) -> Result<IndicatorValue> {
    if record.is_empty() {
        return Err(Error::EmptyRecord);
    }
    let value = match kind {
        IndicatorKind::MeanCitations => total(record) as f64 / record.len() as f64,
        IndicatorKind::MedianCitations => {
            let sorted = sorted_citations(record);
            let n = sorted.len();
            if n % 2 == 1 {
                sorted[n / 2] as f64
            } else {
                (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
            }
        }
        IndicatorKind::TotalCitations => total(record) as f64,
        IndicatorKind::MaxCitations => record.citations().max().unwrap_or(0) as f64,
        IndicatorKind::HIndex => h_index(record) as f64,
        IndicatorKind::PapersPerYear => {
            let mut years = record.papers.iter().filter_map(|p| p.year);
            let first = years.next().ok_or(Error::YearDataRequired)?;
            let (lo, hi) = years.fold((first, first), |(lo, hi), y| (lo.min(y), hi.max(y)));
            record.len() as f64 / f64::from(hi - lo + 1)
        }
    };
    Ok(IndicatorValue { kind, value })
}

fn total(record: &CitationRecord) -> u64 {
    record.citations().sum()
}

fn sorted_citations(record: &CitationRecord) -> Vec<u64> {
    let mut c: Vec<u64> = record.citations().collect();
    c.sort_unstable();
    c
}

/// Largest `h` such that at least `h` papers have at least `h` citations.
pub fn h_index(record: &CitationRecord) -> usize {
    let mut c = sorted_citations(record);
    c.reverse();
    c.iter()
        .enumerate()
        .take_while(|&(i, &cites)| cites >= (i + 1) as u64)
        .count()
}
