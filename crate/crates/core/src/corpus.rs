//! Papers, authors, corpora and citation binning.

use std::collections::HashSet;
use std::io::{Read, Write};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::improbability::CitationDistribution;
use crate::{Error, Result};

pub const MIN_YEAR: i64 = 1800;
pub const MAX_YEAR: i64 = 2200;

/// Lower edges of the SPIRES citation-summary intervals.
pub const TABLE1_EDGES: [u64; 6] = [0, 1, 10, 50, 100, 500];
pub const TABLE1_LABELS: [&str; 6] = [
    "Unknown papers",
    "Less known papers",
    "Known papers",
    "Well-known papers",
    "Famous papers",
    "Renowned papers",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paper {
    #[serde(rename = "paper_id")]
    pub id: String,
    pub citations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, rename = "field", skip_serializing_if = "Option::is_none")]
    pub field_tag: Option<String>,
}

impl Paper {
    pub fn new(id: impl Into<String>, citations: u64) -> Self {
        Self {
            id: id.into(),
            citations,
            year: None,
            field_tag: None,
        }
    }

    pub fn with_year(mut self, year: i32) -> Self {
        self.year = Some(year);
        self
    }

    pub fn with_field(mut self, field: impl Into<String>) -> Self {
        self.field_tag = Some(field.into());
        self
    }

    fn validate(&self) -> Result<()> {
        if let Some(y) = self.year {
            let y = i64::from(y);
            if !(MIN_YEAR..=MAX_YEAR).contains(&y) {
                return Err(Error::YearOutOfRange(y));
            }
        }
        Ok(())
    }
}

/// One author's papers in input order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationRecord {
    pub author_id: String,
    pub papers: Vec<Paper>,
}

impl CitationRecord {
    pub fn new(author_id: impl Into<String>, papers: Vec<Paper>) -> Self {
        Self {
            author_id: author_id.into(),
            papers,
        }
    }

    /// Convenience constructor from bare citation counts; paper ids are
    /// positional (`p0`, `p1`, ...).
    pub fn from_citations(author_id: impl Into<String>, citations: &[u64]) -> Self {
        let papers = citations
            .iter()
            .enumerate()
            .map(|(i, &c)| Paper::new(format!("p{i}"), c))
            .collect();
        Self::new(author_id, papers)
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn citations(&self) -> impl Iterator<Item = u64> + '_ {
        self.papers.iter().map(|p| p.citations)
    }

    fn validate(&self) -> Result<()> {
        if self.author_id.is_empty() {
            return Err(Error::EmptyAuthorId);
        }
        let mut seen = HashSet::new();
        for p in &self.papers {
            p.validate()?;
            if !seen.insert(p.id.as_str()) {
                return Err(Error::DuplicatePaper {
                    author_id: self.author_id.clone(),
                    paper_id: p.id.clone(),
                });
            }
        }
        Ok(())
    }
}

/// An immutable collection of authors with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Corpus {
    authors: Vec<CitationRecord>,
}

impl Corpus {
    pub fn new(authors: Vec<CitationRecord>) -> Result<Self> {
        let mut ids = HashSet::with_capacity(authors.len());
        for a in &authors {
            a.validate()?;
            if !ids.insert(a.author_id.as_str()) {
                return Err(Error::DuplicateAuthor(a.author_id.clone()));
            }
        }
        Ok(Self { authors })
    }

    pub fn authors(&self) -> &[CitationRecord] {
        &self.authors
    }

    pub fn len(&self) -> usize {
        self.authors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.authors.is_empty()
    }

    pub fn author(&self, author_id: &str) -> Option<&CitationRecord> {
        self.authors.iter().find(|a| a.author_id == author_id)
    }

    pub fn num_papers(&self) -> usize {
        self.authors.iter().map(CitationRecord::len).sum()
    }

    pub fn papers(&self) -> impl Iterator<Item = &Paper> + '_ {
        self.authors.iter().flat_map(|a| a.papers.iter())
    }

    pub fn into_authors(self) -> Vec<CitationRecord> {
        self.authors
    }
}

impl<'de> Deserialize<'de> for Corpus {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let authors = Vec::<CitationRecord>::deserialize(deserializer)?;
        Corpus::new(authors).map_err(serde::de::Error::custom)
    }
}

/// Half-open citation intervals `[edge_k, edge_{k+1})`, the last unbounded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct BinningScheme {
    boundaries: Vec<u64>,
    labels: Option<Vec<String>>,
}

impl BinningScheme {
    pub fn new(boundaries: Vec<u64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidScheme("at least 2 bins required".into()));
        }
        if boundaries[0] != 0 {
            return Err(Error::InvalidScheme("first boundary must be 0".into()));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidScheme("boundaries must be strictly increasing".into()));
        }
        Ok(Self {
            boundaries,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.boundaries.len() {
            return Err(Error::InvalidScheme(format!(
                "{} labels for {} bins",
                labels.len(),
                self.boundaries.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn table1() -> Self {
        Self {
            boundaries: TABLE1_EDGES.to_vec(),
            labels: Some(TABLE1_LABELS.iter().map(|s| s.to_string()).collect()),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn num_bins(&self) -> usize {
        self.boundaries.len()
    }

    pub fn boundaries(&self) -> &[u64] {
        &self.boundaries
    }

    pub fn label(&self, bin: usize) -> Option<&str> {
        self.labels.as_ref().and_then(|l| l.get(bin)).map(String::as_str)
    }

    /// Inclusive integer range of a bin; `None` as upper bound for the last.
    pub fn interval(&self, bin: usize) -> (u64, Option<u64>) {
        let lo = self.boundaries[bin];
        let hi = self.boundaries.get(bin + 1).map(|next| next - 1);
        (lo, hi)
    }

    pub fn bin_paper(&self, citations: u64) -> usize {
        self.boundaries.partition_point(|&edge| edge <= citations) - 1
    }

    pub fn bin_record(&self, record: &CitationRecord) -> BinnedRecord {
        self.bin_citations(record.citations())
    }

    pub fn bin_citations(&self, citations: impl IntoIterator<Item = u64>) -> BinnedRecord {
        let mut counts = vec![0u64; self.num_bins()];
        for c in citations {
            counts[self.bin_paper(c)] += 1;
        }
        BinnedRecord::new(counts)
    }
}

impl Default for BinningScheme {
    fn default() -> Self {
        Self::table1()
    }
}

impl TryFrom<Vec<u64>> for BinningScheme {
    type Error = Error;

    fn try_from(value: Vec<u64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<BinningScheme> for Vec<u64> {
    fn from(value: BinningScheme) -> Self {
        value.boundaries
    }
}

pub fn bin_paper(citations: u64, scheme: &BinningScheme) -> usize {
    scheme.bin_paper(citations)
}

pub fn bin_record(record: &CitationRecord, scheme: &BinningScheme) -> BinnedRecord {
    scheme.bin_record(record)
}

/// Paper counts `n_i` per citation bin.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BinnedRecord {
    counts: Vec<u64>,
}

impl BinnedRecord {
    pub fn new(counts: Vec<u64>) -> Self {
        Self { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `N = Σ n_i`.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Bin frequencies of a collection of papers.
pub fn empirical_distribution<'a>(
    papers: impl IntoIterator<Item = &'a Paper>,
    scheme: &BinningScheme,
) -> Result<CitationDistribution> {
    let binned = scheme.bin_citations(papers.into_iter().map(|p| p.citations));
    let n = binned.total();
    if n == 0 {
        return Err(Error::NoPapers);
    }
    CitationDistribution::new(binned.counts().iter().map(|&c| c as f64 / n as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    author_id: String,
    paper_id: String,
    citations: String,
    #[serde(default)]
    year: String,
    #[serde(default)]
    field: String,
}

#[derive(Serialize)]
struct CsvRowOut<'a> {
    author_id: &'a str,
    paper_id: &'a str,
    citations: u64,
    year: Option<i32>,
    field: Option<&'a str>,
}

pub fn load_corpus(source: impl Read, format: Format) -> Result<Corpus> {
    match format {
        Format::Csv => load_csv(source),
        Format::Json => Ok(serde_json::from_reader(source)?),
    }
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn load_csv(source: impl Read) -> Result<Corpus> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let mut grouped: IndexMap<String, Vec<Paper>> = IndexMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let headers = reader.headers()?.clone();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: CsvRow = record
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(line, e.to_string()))?;
        if row.author_id.is_empty() {
            return Err(parse_err(line, "empty author_id"));
        }
        let citations: i64 = row
            .citations
            .parse()
            .map_err(|_| parse_err(line, format!("invalid citations `{}`", row.citations)))?;
        if citations < 0 {
            return Err(parse_err(line, format!("negative citations {citations}")));
        }
        let year = if row.year.is_empty() {
            None
        } else {
            let y: i32 = row
                .year
                .parse()
                .map_err(|_| parse_err(line, format!("invalid year `{}`", row.year)))?;
            if !(MIN_YEAR..=MAX_YEAR).contains(&i64::from(y)) {
                return Err(parse_err(line, format!("year {y} outside 1800..=2200")));
            }
            Some(y)
        };
        if !seen.insert((row.author_id.clone(), row.paper_id.clone())) {
            return Err(parse_err(
                line,
                format!("duplicate paper `{}` for author `{}`", row.paper_id, row.author_id),
            ));
        }
        let paper = Paper {
            id: row.paper_id,
            citations: citations as u64,
            year,
            field_tag: (!row.field.is_empty()).then_some(row.field),
        };
        grouped.entry(row.author_id).or_default().push(paper);
    }
    Corpus::new(
        grouped
            .into_iter()
            .map(|(author_id, papers)| CitationRecord { author_id, papers })
            .collect(),
    )
}

/// Writes `corpus` in the given format. CSV has one row per paper, so
/// authors without papers are not represented there.
pub fn write_corpus(corpus: &Corpus, sink: impl Write, format: Format) -> Result<()> {
    match format {
        Format::Json => {
            let mut sink = sink;
            serde_json::to_writer_pretty(&mut sink, corpus)?;
            writeln!(sink)?;
        }
        Format::Csv => {
            let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
            writer.write_record(["author_id", "paper_id", "citations", "year", "field"])?;
            for a in corpus.authors() {
                for p in &a.papers {
                    writer.serialize(CsvRowOut {
                        author_id: &a.author_id,
                        paper_id: &p.id,
                        citations: p.citations,
                        year: p.year,
                        field: p.field_tag.as_deref(),
                    })?;
                }
            }
            writer.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_scan(c: u64, edges: &[u64]) -> usize {
        let mut bin = 0;
        for (i, &e) in edges.iter().enumerate() {
            if c >= e {
                bin = i;
            }
        }
        bin
    }

    #[test]
    fn table1_bin_edges() {
        let s = BinningScheme::table1();
        assert_eq!(s.bin_paper(0), 0);
        assert_eq!(s.label(0), Some("Unknown papers"));
        assert_eq!(s.bin_paper(9), 1);
        assert_eq!(s.bin_paper(10), 2);
        assert_eq!(s.bin_paper(500), 5);
        assert_eq!(s.bin_paper(u64::MAX), 5);
        for c in 0..=1000 {
            assert_eq!(s.bin_paper(c), linear_scan(c, &TABLE1_EDGES), "c = {c}");
        }
        assert_eq!(s.interval(1), (1, Some(9)));
        assert_eq!(s.interval(5), (500, None));
    }

    #[test]
    fn bins_authors_a_and_b() {
        let s = BinningScheme::table1();
        let a = CitationRecord::from_citations("A", &[100; 10]);
        let mut b_cites = vec![0; 9];
        b_cites.push(1000);
        let b = CitationRecord::from_citations("B", &b_cites);
        assert_eq!(bin_record(&a, &s).counts(), &[0, 0, 0, 0, 10, 0]);
        assert_eq!(bin_record(&b, &s).counts(), &[9, 0, 0, 0, 0, 1]);
        let empty = CitationRecord::from_citations("E", &[]);
        assert_eq!(bin_record(&empty, &s).counts(), &[0; 6]);
    }

    #[test]
    fn scheme_validation() {
        assert!(BinningScheme::new(vec![0]).is_err());
        assert!(BinningScheme::new(vec![1, 5]).is_err());
        assert!(BinningScheme::new(vec![0, 5, 5]).is_err());
        let s = BinningScheme::from_json(b"[0,1,10,50,100,500]").unwrap();
        assert_eq!(s.boundaries(), &TABLE1_EDGES);
        assert!(BinningScheme::from_json(b"[0,10,1]").is_err());
    }

    #[test]
    fn empirical_distribution_examples() {
        let s = BinningScheme::table1();
        let r = CitationRecord::from_citations("x", &[0, 0, 5, 50]);
        let d = empirical_distribution(&r.papers, &s).unwrap();
        assert_eq!(d.probabilities(), &[0.5, 0.25, 0.0, 0.25, 0.0, 0.0]);
        let r = CitationRecord::from_citations("x", &[60, 70, 80]);
        let d = empirical_distribution(&r.papers, &s).unwrap();
        assert_eq!(d.probabilities(), &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(empirical_distribution(&[], &s), Err(Error::NoPapers)));
    }

    #[test]
    fn loads_csv() {
        let data = "author_id,paper_id,citations,year,field\n\
                    alice,p1,12,2001,hep-th\n\
                    bob,q1,0,,\n\
                    alice,p2,3,,hep-ph\n";
        let c = load_corpus(data.as_bytes(), Format::Csv).unwrap();
        assert_eq!(c.len(), 2);
        let alice = &c.authors()[0];
        assert_eq!(alice.author_id, "alice");
        assert_eq!(alice.papers.len(), 2);
        assert_eq!(alice.papers[0].id, "p1");
        assert_eq!(alice.papers[0].year, Some(2001));
        assert_eq!(alice.papers[1].field_tag.as_deref(), Some("hep-ph"));
        assert_eq!(c.authors()[1].papers[0].year, None);
    }

    #[test]
    fn header_only_csv_is_empty() {
        let c = load_corpus("author_id,paper_id,citations,year,field\n".as_bytes(), Format::Csv).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn csv_rejections_name_the_line() {
        let neg = "author_id,paper_id,citations,year,field\na,p1,3,,\na,p2,-1,,\n";
        let err = load_corpus(neg.as_bytes(), Format::Csv).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("line 3"));

        let dup = "author_id,paper_id,citations,year,field\na,p1,3,,\na,p1,4,,\n";
        assert!(matches!(
            load_corpus(dup.as_bytes(), Format::Csv),
            Err(Error::Parse { line: 3, .. })
        ));

        let short = "author_id,paper_id,citations,year,field\na,p1\n";
        assert!(matches!(
            load_corpus(short.as_bytes(), Format::Csv),
            Err(Error::Parse { line: 2, .. })
        ));

        let year = "author_id,paper_id,citations,year,field\na,p1,3,1500,\n";
        assert!(load_corpus(year.as_bytes(), Format::Csv).is_err());
    }

    #[test]
    fn loads_json() {
        let data = r#"[{"author_id":"a","papers":[{"paper_id":"x","citations":4,"year":1999},
                       {"paper_id":"y","citations":0,"field":"math"}]},
                      {"author_id":"b","papers":[]}]"#;
        let c = load_corpus(data.as_bytes(), Format::Json).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.authors()[0].papers[1].field_tag.as_deref(), Some("math"));
        assert!(c.authors()[1].is_empty());

        let dup = r#"[{"author_id":"a","papers":[]},{"author_id":"a","papers":[]}]"#;
        assert!(load_corpus(dup.as_bytes(), Format::Json).is_err());
        let neg = r#"[{"author_id":"a","papers":[{"paper_id":"x","citations":-4}]}]"#;
        assert!(load_corpus(neg.as_bytes(), Format::Json).is_err());
    }
}
