//! Cross-field comparison: detecting different citation cultures between
//! sub-corpora and ranking authors against their own field.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{BinningScheme, CitationRecord, Corpus};
use crate::indicators::{evaluate, IndicatorKind};
use crate::special::chi_square_sf;
use crate::{Error, Result};

/// Sub-corpora keyed by field tag. An author publishing in several fields
/// appears in each, with only that field's papers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldPartition {
    fields: BTreeMap<String, Corpus>,
}

impl FieldPartition {
    /// Splits `corpus` by paper field tag; every paper must carry one.
    pub fn from_corpus(corpus: &Corpus) -> Result<Self> {
        let mut grouped: BTreeMap<String, Vec<CitationRecord>> = BTreeMap::new();
        for author in corpus.authors() {
            for (tag, record) in records_by_field(author)? {
                grouped.entry(tag).or_default().push(record);
            }
        }
        let fields = grouped
            .into_iter()
            .map(|(tag, authors)| Ok((tag, Corpus::new(authors)?)))
            .collect::<Result<_>>()?;
        Ok(Self { fields })
    }

    pub fn get(&self, tag: &str) -> Option<&Corpus> {
        self.fields.get(tag)
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> + '_ {
        self.fields.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Corpus)> + '_ {
        self.fields.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

/// Splits one author's papers by field tag.
pub fn records_by_field(author: &CitationRecord) -> Result<BTreeMap<String, CitationRecord>> {
    let mut out: BTreeMap<String, CitationRecord> = BTreeMap::new();
    for paper in &author.papers {
        let tag = match paper.field_tag.as_deref() {
            Some(t) if !t.is_empty() => t,
            _ => {
                return Err(Error::MissingFieldTag {
                    author_id: author.author_id.clone(),
                    paper_id: paper.id.clone(),
                })
            }
        };
        out.entry(tag.to_string())
            .or_insert_with(|| CitationRecord::new(author.author_id.clone(), Vec::new()))
            .papers
            .push(paper.clone());
    }
    Ok(out)
}

fn mean_citations(corpus: &Corpus) -> Result<f64> {
    let n = corpus.num_papers();
    if n == 0 {
        return Err(Error::NoPapers);
    }
    Ok(corpus.papers().map(|p| p.citations as f64).sum::<f64>() / n as f64)
}

/// Mean citations per paper in `a` over that in `b`.
pub fn mean_ratio(a: &Corpus, b: &Corpus) -> Result<f64> {
    let ma = mean_citations(a)?;
    let mb = mean_citations(b)?;
    if mb == 0.0 {
        return Err(Error::RatioUndefined);
    }
    Ok(ma / mb)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Two-sample chi-square test on binned counts. Bins empty on both sides
/// are dropped before counting degrees of freedom.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<ChiSquareTest> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let total_a: u64 = a.iter().sum();
    let total_b: u64 = b.iter().sum();
    if total_a == 0 || total_b == 0 {
        return Err(Error::NoPapers);
    }
    let grand = (total_a + total_b) as f64;
    let mut chi_square = 0.0;
    let mut shared = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        let column = (x + y) as f64;
        if column == 0.0 {
            continue;
        }
        shared += 1;
        let ea = total_a as f64 * column / grand;
        let eb = total_b as f64 * column / grand;
        chi_square += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    let degrees_of_freedom = shared.saturating_sub(1);
    Ok(ChiSquareTest {
        chi_square,
        degrees_of_freedom,
        p_value: chi_square_sf(chi_square, degrees_of_freedom),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityReport {
    pub field_a: String,
    pub field_b: String,
    /// `None` when field b has zero mean citations.
    pub mean_ratio: Option<f64>,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

pub fn homogeneity_report(
    (name_a, a): (&str, &Corpus),
    (name_b, b): (&str, &Corpus),
    scheme: &BinningScheme,
) -> Result<HomogeneityReport> {
    let ratio = match mean_ratio(a, b) {
        Ok(r) => Some(r),
        Err(Error::RatioUndefined) => None,
        Err(e) => return Err(e),
    };
    let counts_a = scheme.bin_citations(a.papers().map(|p| p.citations));
    let counts_b = scheme.bin_citations(b.papers().map(|p| p.citations));
    let test = chi_square_homogeneity(counts_a.counts(), counts_b.counts())?;
    Ok(HomogeneityReport {
        field_a: name_a.to_string(),
        field_b: name_b.to_string(),
        mean_ratio: ratio,
        chi_square: test.chi_square,
        degrees_of_freedom: test.degrees_of_freedom,
        p_value: test.p_value,
    })
}

/// One report per unordered field pair, in tag order.
pub fn pairwise_reports(partition: &FieldPartition, scheme: &BinningScheme) -> Result<Vec<HomogeneityReport>> {
    let fields: Vec<(&str, &Corpus)> = partition.iter().collect();
    let mut out = Vec::new();
    for (i, &a) in fields.iter().enumerate() {
        for &b in &fields[i + 1..] {
            out.push(homogeneity_report(a, b, scheme)?);
        }
    }
    Ok(out)
}

/// Mid-rank percentile of `author` among `peers` plus the author.
///
/// Peers sharing the author's id are skipped, so the author is counted
/// exactly once. Result = (#below + ½·#equal) / population, where the
/// author is one of the equal.
pub fn percentile_of(author: &CitationRecord, peers: &Corpus, kind: IndicatorKind) -> Result<f64> {
    let own = evaluate(kind, author)?.value;
    let mut below = 0usize;
    let mut equal = 1usize;
    for peer in peers.authors().iter().filter(|p| p.author_id != author.author_id) {
        let v = evaluate(kind, peer)?.value;
        if v < own {
            below += 1;
        } else if v == own {
            equal += 1;
        }
    }
    let population = peers
        .authors()
        .iter()
        .filter(|p| p.author_id != author.author_id)
        .count()
        + 1;
    Ok((below as f64 + 0.5 * equal as f64) / population as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPercentile {
    pub field: String,
    pub papers: usize,
    pub percentile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossFieldRank {
    /// Paper-count-weighted mean of the per-field percentiles.
    pub combined: f64,
    pub per_field: Vec<FieldPercentile>,
}

/// Ranks an author within each of their fields and combines the
/// percentiles, weighting by the author's paper count in each field.
pub fn cross_field_rank(
    author_records: &BTreeMap<String, CitationRecord>,
    partition: &FieldPartition,
    kind: IndicatorKind,
) -> Result<CrossFieldRank> {
    let mut per_field = Vec::with_capacity(author_records.len());
    for (field, record) in author_records {
        let peers = partition.get(field).ok_or_else(|| Error::UnknownField(field.clone()))?;
        if !peers.authors().iter().any(|p| p.author_id != record.author_id) {
            return Err(Error::EmptyField(field.clone()));
        }
        if record.is_empty() {
            return Err(Error::EmptyRecord);
        }
        per_field.push(FieldPercentile {
            field: field.clone(),
            papers: record.len(),
            percentile: percentile_of(record, peers, kind)?,
        });
    }
    if per_field.is_empty() {
        return Err(Error::EmptyRecord);
    }
    let weight: usize = per_field.iter().map(|f| f.papers).sum();
    let combined = per_field
        .iter()
        .map(|f| f.papers as f64 * f.percentile)
        .sum::<f64>()
        / weight as f64;
    Ok(CrossFieldRank { combined, per_field })
}
