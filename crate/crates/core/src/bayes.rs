//! Discriminatory power of an author indicator.
//!
//! Authors are split into quantile bins `α` by an indicator. For each bin
//! the papers of its authors give a conditional citation distribution
//! `P(i|α)`. A record `{n_i}` is then scored against every bin with the
//! multinomial likelihood and inverted with Bayes' theorem,
//!
//! ```text
//! P(α|{n_i}) ∝ P({n_i}|α) · p(α)
//! ```
//!
//! Averaging posteriors over the authors initially placed in bin `β` yields
//! the confusion matrix `P(α|β)`. A sharp indicator concentrates that
//! matrix on its diagonal; an indicator unrelated to citations leaves every
//! row close to the prior.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{BinnedRecord, BinningScheme, Corpus};
use crate::improbability::CitationDistribution;
use crate::indicators::{evaluate, IndicatorKind};
use crate::synthetic::{sample_corpus, substream, GenerativeModel, PapersPerAuthor, Seed};
use crate::{Error, Result};

pub const DEFAULT_NUM_BINS: usize = 10;
pub const DEFAULT_PSEUDOCOUNT: f64 = 0.5;

const PRIOR_TOLERANCE: f64 = 1e-9;

/// What authors are ranked by before quantile binning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinningKey {
    Indicator(IndicatorKind),
    /// Ranks by a fixed hash of the author id; carries no citation
    /// information and serves as the null indicator.
    Hash,
}

impl BinningKey {
    fn score(self, record: &crate::corpus::CitationRecord) -> Result<f64> {
        match self {
            BinningKey::Indicator(kind) => Ok(evaluate(kind, record)?.value),
            BinningKey::Hash => Ok(fnv1a(record.author_id.as_bytes()) as f64),
        }
    }
}

impl From<IndicatorKind> for BinningKey {
    fn from(kind: IndicatorKind) -> Self {
        BinningKey::Indicator(kind)
    }
}

impl fmt::Display for BinningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BinningKey::Indicator(kind) => kind.fmt(f),
            BinningKey::Hash => f.write_str("hash"),
        }
    }
}

impl FromStr for BinningKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "hash" {
            Ok(BinningKey::Hash)
        } else {
            s.parse().map(BinningKey::Indicator)
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Assignment of every corpus author to one of `num_bins` author bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorBinning {
    num_bins: usize,
    /// Bin index per author, in corpus order.
    assignment: Vec<usize>,
    prior: Vec<f64>,
}

impl AuthorBinning {
    /// Binning from an explicit per-author assignment (corpus order).
    /// The prior is the empirical share of each bin.
    pub fn from_assignment(assignment: Vec<usize>, num_bins: usize) -> Result<Self> {
        if num_bins == 0 {
            return Err(Error::TooFewBins { min: 1, got: 0 });
        }
        if assignment.is_empty() {
            return Err(Error::TooFewAuthors { authors: 0, bins: num_bins });
        }
        let mut sizes = vec![0usize; num_bins];
        for &b in &assignment {
            if b >= num_bins {
                return Err(Error::DimensionMismatch {
                    expected: num_bins,
                    actual: b + 1,
                });
            }
            sizes[b] += 1;
        }
        let n = assignment.len() as f64;
        let prior = sizes.iter().map(|&s| s as f64 / n).collect();
        Ok(Self {
            num_bins,
            assignment,
            prior,
        })
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn bin_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_bins];
        for &b in &self.assignment {
            sizes[b] += 1;
        }
        sizes
    }
}

/// Quantile binning: ascending by key, ties by author id, contiguous groups
/// whose sizes differ by at most one (larger groups first).
pub fn bin_authors(corpus: &Corpus, key: impl Into<BinningKey>, num_bins: usize) -> Result<AuthorBinning> {
    let key = key.into();
    if num_bins < 2 {
        return Err(Error::TooFewBins { min: 2, got: num_bins });
    }
    if corpus.len() < num_bins {
        return Err(Error::TooFewAuthors {
            authors: corpus.len(),
            bins: num_bins,
        });
    }
    let mut failed = Vec::new();
    let mut scored = Vec::with_capacity(corpus.len());
    for (idx, author) in corpus.authors().iter().enumerate() {
        match key.score(author) {
            Ok(v) => scored.push((v, author.author_id.as_str(), idx)),
            Err(_) => failed.push(author.author_id.clone()),
        }
    }
    if !failed.is_empty() {
        return Err(Error::IndicatorUndefined(failed));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));

    let n = scored.len();
    let (base, extra) = (n / num_bins, n % num_bins);
    let mut assignment = vec![0usize; n];
    let mut pos = 0;
    for bin in 0..num_bins {
        let size = base + usize::from(bin < extra);
        for &(_, _, idx) in &scored[pos..pos + size] {
            assignment[idx] = bin;
        }
        pos += size;
    }
    AuthorBinning::from_assignment(assignment, num_bins)
}

/// Per-author-bin citation distributions `P(i|α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDistributions {
    rows: Vec<CitationDistribution>,
    counts: Vec<Vec<u64>>,
    pseudocount: f64,
    scheme: BinningScheme,
}

fn smoothed_row(counts: &[u64], pseudocount: f64) -> Option<CitationDistribution> {
    let total: u64 = counts.iter().sum();
    let denom = total as f64 + pseudocount * counts.len() as f64;
    if denom <= 0.0 {
        return None;
    }
    let probs = counts.iter().map(|&c| (c as f64 + pseudocount) / denom).collect();
    CitationDistribution::new(probs).ok()
}

impl ConditionalDistributions {
    /// Wraps explicit rows, e.g. known model distributions.
    pub fn from_rows(rows: Vec<CitationDistribution>, scheme: BinningScheme) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::TooFewBins { min: 1, got: 0 });
        }
        for row in &rows {
            if row.num_bins() != scheme.num_bins() {
                return Err(Error::DimensionMismatch {
                    expected: scheme.num_bins(),
                    actual: row.num_bins(),
                });
            }
        }
        Ok(Self {
            counts: Vec::new(),
            rows,
            pseudocount: 0.0,
            scheme,
        })
    }

    pub fn rows(&self) -> &[CitationDistribution] {
        &self.rows
    }

    pub fn num_author_bins(&self) -> usize {
        self.rows.len()
    }

    pub fn pseudocount(&self) -> f64 {
        self.pseudocount
    }

    pub fn scheme(&self) -> &BinningScheme {
        &self.scheme
    }

    /// Raw paper counts per author bin and citation bin; empty when the
    /// rows were supplied directly.
    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    /// Row `bin` with `own` removed from its counts.
    fn row_without(&self, bin: usize, own: &[u64]) -> Result<CitationDistribution> {
        if self.counts.is_empty() {
            return Ok(self.rows[bin].clone());
        }
        let reduced: Vec<u64> = self.counts[bin]
            .iter()
            .zip(own)
            .map(|(c, o)| c.saturating_sub(*o))
            .collect();
        smoothed_row(&reduced, self.pseudocount).ok_or(Error::EmptyAuthorBin(bin))
    }
}

pub fn conditional_distributions(
    corpus: &Corpus,
    binning: &AuthorBinning,
    scheme: &BinningScheme,
    pseudocount: f64,
) -> Result<ConditionalDistributions> {
    if !pseudocount.is_finite() || pseudocount < 0.0 {
        return Err(Error::NegativePseudocount(pseudocount));
    }
    check_binning(corpus, binning)?;
    let mut counts = vec![vec![0u64; scheme.num_bins()]; binning.num_bins()];
    for (author, &bin) in corpus.authors().iter().zip(binning.assignment()) {
        for c in author.citations() {
            counts[bin][scheme.bin_paper(c)] += 1;
        }
    }
    let rows = counts
        .iter()
        .enumerate()
        .map(|(bin, c)| smoothed_row(c, pseudocount).ok_or(Error::EmptyAuthorBin(bin)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionalDistributions {
        rows,
        counts,
        pseudocount,
        scheme: scheme.clone(),
    })
}

fn check_binning(corpus: &Corpus, binning: &AuthorBinning) -> Result<()> {
    if binning.assignment().len() != corpus.len() {
        return Err(Error::DimensionMismatch {
            expected: corpus.len(),
            actual: binning.assignment().len(),
        });
    }
    Ok(())
}

/// `P(α|{n_i})` over author bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Posterior {
    probabilities: Vec<f64>,
}

impl Posterior {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Most probable bin; the lowest index wins ties.
    pub fn mode(&self) -> usize {
        argmax(&self.probabilities)
    }
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

/// Normalizes log-masses by max-shifted exponentiation.
fn normalize_log_masses(log_masses: &[f64]) -> Option<Vec<f64>> {
    let max = log_masses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let weights: Vec<f64> = log_masses.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = weights.iter().sum();
    Some(weights.into_iter().map(|w| w / sum).collect())
}

/// `Σ_i n_i ln P(i|α)`; the multinomial coefficient is dropped because it
/// is shared by every `α`.
fn ln_kernel(counts: &[u64], probabilities: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&n, &p) in counts.iter().zip(probabilities) {
        if n > 0 {
            if p == 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += n as f64 * p.ln();
        }
    }
    acc
}

fn posterior_from_rows<'a>(
    counts: &[u64],
    rows: impl Iterator<Item = &'a CitationDistribution>,
    prior: &[f64],
) -> Result<Posterior> {
    let log_masses: Vec<f64> = rows
        .zip(prior)
        .map(|(row, &p)| ln_kernel(counts, row.probabilities()) + p.ln())
        .collect();
    let probabilities = normalize_log_masses(&log_masses).ok_or_else(|| {
        let bin = counts.iter().position(|&n| n > 0).unwrap_or(0);
        Error::OutsideSupport {
            bin,
            count: counts[bin],
        }
    })?;
    Ok(Posterior { probabilities })
}

fn check_prior(prior: &[f64], bins: usize) -> Result<()> {
    if prior.len() != bins {
        return Err(Error::DimensionMismatch {
            expected: bins,
            actual: prior.len(),
        });
    }
    let sum: f64 = prior.iter().sum();
    if (sum - 1.0).abs() > PRIOR_TOLERANCE || prior.iter().any(|&p| p.is_nan() || p < 0.0) {
        return Err(Error::InvalidDistribution(format!("prior sums to {sum}")));
    }
    Ok(())
}

pub fn posterior(
    binned: &BinnedRecord,
    conditionals: &ConditionalDistributions,
    prior: &[f64],
) -> Result<Posterior> {
    check_prior(prior, conditionals.num_author_bins())?;
    let bins = conditionals.scheme().num_bins();
    if binned.counts().len() != bins {
        return Err(Error::DimensionMismatch {
            expected: bins,
            actual: binned.counts().len(),
        });
    }
    posterior_from_rows(binned.counts(), conditionals.rows().iter(), prior)
}

/// Posterior of one corpus author together with the bin the indicator put
/// them in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorPosterior {
    pub author_id: String,
    pub assigned: usize,
    pub posterior: Posterior,
}

fn posterior_for_counts(
    counts: &[u64],
    assigned: usize,
    conditionals: &ConditionalDistributions,
    prior: &[f64],
    leave_one_out: bool,
    own: &[u64],
) -> Result<Posterior> {
    if leave_one_out && !conditionals.counts.is_empty() {
        let replaced = conditionals.row_without(assigned, own)?;
        let rows = conditionals
            .rows()
            .iter()
            .enumerate()
            .map(|(a, row)| if a == assigned { &replaced } else { row });
        posterior_from_rows(counts, rows, prior)
    } else {
        posterior_from_rows(counts, conditionals.rows().iter(), prior)
    }
}

/// Posterior of every author, in corpus order. With `leave_one_out` each
/// author's own papers are removed from their bin's conditional first.
pub fn author_posteriors(
    corpus: &Corpus,
    binning: &AuthorBinning,
    conditionals: &ConditionalDistributions,
    leave_one_out: bool,
) -> Result<Vec<AuthorPosterior>> {
    check_binning(corpus, binning)?;
    check_prior(binning.prior(), conditionals.num_author_bins())?;
    let scheme = conditionals.scheme();
    corpus
        .authors()
        .par_iter()
        .zip(binning.assignment().par_iter())
        .map(|(author, &assigned)| {
            let binned = scheme.bin_record(author);
            let posterior = posterior_for_counts(
                binned.counts(),
                assigned,
                conditionals,
                binning.prior(),
                leave_one_out,
                binned.counts(),
            )?;
            Ok(AuthorPosterior {
                author_id: author.author_id.clone(),
                assigned,
                posterior,
            })
        })
        .collect()
}

/// `P(α|β)`: row `β` is the mean posterior of the authors assigned to `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    rows: Vec<Vec<f64>>,
    author_counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn from_posteriors(num_bins: usize, posteriors: &[AuthorPosterior]) -> Result<Self> {
        let mut rows = vec![vec![0.0; num_bins]; num_bins];
        let mut author_counts = vec![0usize; num_bins];
        for ap in posteriors {
            let probs = ap.posterior.probabilities();
            if probs.len() != num_bins || ap.assigned >= num_bins {
                return Err(Error::DimensionMismatch {
                    expected: num_bins,
                    actual: probs.len().max(ap.assigned + 1),
                });
            }
            author_counts[ap.assigned] += 1;
            for (acc, p) in rows[ap.assigned].iter_mut().zip(probs) {
                *acc += p;
            }
        }
        for (bin, (row, &n)) in rows.iter_mut().zip(&author_counts).enumerate() {
            if n == 0 {
                return Err(Error::EmptyAuthorBin(bin));
            }
            row.iter_mut().for_each(|v| *v /= n as f64);
        }
        Ok(Self { rows, author_counts })
    }

    /// Builds a matrix from explicit rows, each renormalized to sum to one.
    pub fn from_rows(rows: Vec<Vec<f64>>, author_counts: Vec<usize>) -> Result<Self> {
        let n = rows.len();
        if author_counts.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: author_counts.len(),
            });
        }
        let mut out = Vec::with_capacity(n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            let sum: f64 = row.iter().sum();
            if sum.is_nan() || sum <= 0.0 {
                return Err(Error::InvalidDistribution(format!("confusion row sums to {sum}")));
            }
            out.push(row.into_iter().map(|v| v / sum).collect());
        }
        Ok(Self {
            rows: out,
            author_counts,
        })
    }

    pub fn num_bins(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, assigned: usize) -> &[f64] {
        &self.rows[assigned]
    }

    pub fn author_counts(&self) -> &[usize] {
        &self.author_counts
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.num_bins()).map(|b| self.rows[b][b]).collect()
    }

    /// Whether each row attains its maximum on the diagonal.
    pub fn is_diagonal_dominant(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(b, row)| row.iter().all(|&v| v <= row[b]))
    }

    /// Header of inferred-bin indices, one line per assigned bin, author
    /// count in the last column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("assigned");
        for a in 0..self.num_bins() {
            out.push_str(&format!(",{a}"));
        }
        out.push_str(",authors\n");
        for (b, row) in self.rows.iter().enumerate() {
            out.push_str(&b.to_string());
            for v in row {
                out.push_str(&format!(",{v:?}"));
            }
            out.push_str(&format!(",{}\n", self.author_counts[b]));
        }
        out
    }
}

pub fn confusion_matrix(
    corpus: &Corpus,
    binning: &AuthorBinning,
    conditionals: &ConditionalDistributions,
    leave_one_out: bool,
) -> Result<ConfusionMatrix> {
    let posteriors = author_posteriors(corpus, binning, conditionals, leave_one_out)?;
    ConfusionMatrix::from_posteriors(binning.num_bins(), &posteriors)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMetrics {
    pub bin: usize,
    pub authors: usize,
    pub accuracy: f64,
    pub mean_correct_mass: f64,
}

/// Two readings of assignment quality: how often the posterior mode hits
/// the assigned bin, and how much posterior mass lands there on average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentMetrics {
    pub accuracy: f64,
    pub mean_correct_mass: f64,
    pub per_bin: Vec<BinMetrics>,
}

/// Computes assignment metrics. Without per-author posteriors each matrix
/// row stands in for the posterior of all authors in its bin.
pub fn assignment_metrics(matrix: &ConfusionMatrix, per_author_posteriors: &[AuthorPosterior]) -> AssignmentMetrics {
    let k = matrix.num_bins();
    let mut hits = vec![0.0; k];
    let mut weight = vec![0.0; k];
    if per_author_posteriors.is_empty() {
        for (b, row) in matrix.rows().iter().enumerate() {
            let n = matrix.author_counts()[b] as f64;
            weight[b] = n;
            hits[b] = if argmax(row) == b { n } else { 0.0 };
        }
    } else {
        for ap in per_author_posteriors {
            weight[ap.assigned] += 1.0;
            if ap.posterior.mode() == ap.assigned {
                hits[ap.assigned] += 1.0;
            }
        }
    }
    let diagonal = matrix.diagonal();
    let per_bin: Vec<BinMetrics> = (0..k)
        .map(|b| BinMetrics {
            bin: b,
            authors: weight[b] as usize,
            accuracy: if weight[b] > 0.0 { hits[b] / weight[b] } else { 0.0 },
            mean_correct_mass: diagonal[b],
        })
        .collect();
    let total: f64 = weight.iter().sum();
    let (accuracy, mean_correct_mass) = if total > 0.0 {
        (
            hits.iter().sum::<f64>() / total,
            diagonal.iter().zip(&weight).map(|(d, w)| d * w).sum::<f64>() / total,
        )
    } else {
        (0.0, 0.0)
    };
    AssignmentMetrics {
        accuracy,
        mean_correct_mass,
        per_bin,
    }
}

/// `KL(p‖q) = Σ p_i ln(p_i / q_i)` in nats.
pub fn kl_divergence(p: &CitationDistribution, q: &CitationDistribution) -> Result<f64> {
    if p.num_bins() != q.num_bins() {
        return Err(Error::DimensionMismatch {
            expected: p.num_bins(),
            actual: q.num_bins(),
        });
    }
    let mut acc = 0.0;
    for (index, (&pi, &qi)) in p.probabilities().iter().zip(q.probabilities()).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::KlSupport { index });
        }
        acc += pi * (pi / qi).ln();
    }
    Ok(acc)
}

/// `KL(P(·|α) ‖ P(·|α+1))` for each adjacent pair of author bins.
pub fn adjacent_kl(conditionals: &ConditionalDistributions) -> Result<Vec<f64>> {
    conditionals
        .rows()
        .windows(2)
        .map(|w| kl_divergence(&w[0], &w[1]))
        .collect()
}

/// Mean of `KL(P(·|α) ‖ P(·|β))` over ordered pairs `α ≠ β`.
pub fn mean_pairwise_kl(conditionals: &ConditionalDistributions) -> Result<f64> {
    let rows = conditionals.rows();
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (a, p) in rows.iter().enumerate() {
        for (b, q) in rows.iter().enumerate() {
            if a != b {
                sum += kl_divergence(p, q)?;
                pairs += 1;
            }
        }
    }
    Ok(if pairs == 0 { 0.0 } else { sum / pairs as f64 })
}

/// Where the records for an accuracy curve come from.
#[derive(Debug, Clone, Copy)]
pub enum CurveSource<'a> {
    /// Subsample each author's papers.
    Corpus {
        corpus: &'a Corpus,
        scheme: &'a BinningScheme,
    },
    /// Draw `num_authors` authors with `max(Ns)` papers each, then subsample.
    Model {
        model: &'a GenerativeModel,
        num_authors: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveConfig {
    pub key: BinningKey,
    pub num_bins: usize,
    pub pseudocount: f64,
    pub ns: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub accuracy: f64,
    pub mean_correct_mass: f64,
}

/// Assignment metrics as a function of the number of papers per author.
///
/// Binning and conditionals come from the full records; for each `N` every
/// author's record is cut down to `N` papers drawn without replacement and
/// rescored. Metrics are averaged over `trials`.
pub fn accuracy_curve(source: CurveSource<'_>, config: &CurveConfig) -> Result<Vec<CurvePoint>> {
    let max_n = *config.ns.iter().max().ok_or(Error::EmptyNList)?;
    if config.ns.contains(&0) {
        return Err(Error::ZeroPaperCount);
    }
    let generated;
    let model_scheme;
    let (corpus, scheme) = match source {
        CurveSource::Corpus { corpus, scheme } => (corpus, scheme),
        CurveSource::Model { model, num_authors } => {
            let model = model.clone().with_papers_per_author(PapersPerAuthor::Fixed(max_n));
            generated = sample_corpus(&model, num_authors, Seed(config.seed))?.corpus;
            model_scheme = model.scheme().clone();
            (&generated, &model_scheme)
        }
    };
    if let Some(short) = corpus.authors().iter().find(|a| a.len() < max_n) {
        return Err(Error::InsufficientPapers {
            author_id: short.author_id.clone(),
            available: short.len(),
            requested: max_n,
        });
    }
    curve_on_corpus(corpus, scheme, config)
}

fn curve_on_corpus(corpus: &Corpus, scheme: &BinningScheme, config: &CurveConfig) -> Result<Vec<CurvePoint>> {
    let binning = bin_authors(corpus, config.key, config.num_bins)?;
    let conditionals = conditional_distributions(corpus, &binning, scheme, config.pseudocount)?;
    let bins: Vec<Vec<usize>> = corpus
        .authors()
        .iter()
        .map(|a| a.citations().map(|c| scheme.bin_paper(c)).collect())
        .collect();
    let trials = config.trials.max(1);

    config
        .ns
        .iter()
        .map(|&n| {
            let mut accuracy = 0.0;
            let mut mass = 0.0;
            for trial in 0..trials {
                let posteriors = bins
                    .par_iter()
                    .zip(corpus.authors().par_iter())
                    .zip(binning.assignment().par_iter())
                    .enumerate()
                    .map(|(idx, ((paper_bins, author), &assigned))| {
                        let mut rng = substream(config.seed, &[0x6375_7276, n as u64, trial as u64, idx as u64]);
                        let mut counts = vec![0u64; scheme.num_bins()];
                        for i in index::sample(&mut rng, paper_bins.len(), n) {
                            counts[paper_bins[i]] += 1;
                        }
                        let posterior = posterior_from_rows(&counts, conditionals.rows().iter(), binning.prior())?;
                        Ok(AuthorPosterior {
                            author_id: author.author_id.clone(),
                            assigned,
                            posterior,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let matrix = ConfusionMatrix::from_posteriors(binning.num_bins(), &posteriors)?;
                let m = assignment_metrics(&matrix, &posteriors);
                accuracy += m.accuracy;
                mass += m.mean_correct_mass;
            }
            Ok(CurvePoint {
                n,
                accuracy: accuracy / trials as f64,
                mean_correct_mass: mass / trials as f64,
            })
        })
        .collect()
}

/// Least-squares slope of `ln(1 − mean correct mass)` against `N`.
pub fn ln_error_slope(points: &[CurvePoint]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|p| (1.0 - p.mean_correct_mass).max(f64::MIN_POSITIVE).ln())
        .collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CitationRecord;

    fn dist(p: &[f64]) -> CitationDistribution {
        CitationDistribution::new(p.to_vec()).unwrap()
    }

    fn two_bin_scheme() -> BinningScheme {
        BinningScheme::new(vec![0, 10]).unwrap()
    }

    fn corpus_of(n: usize, cites: impl Fn(usize) -> Vec<u64>) -> Corpus {
        Corpus::new(
            (0..n)
                .map(|i| CitationRecord::from_citations(format!("a{i:04}"), &cites(i)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn quantile_bins_exact_and_remainder() {
        let c = corpus_of(100, |i| vec![i as u64]);
        let b = bin_authors(&c, IndicatorKind::MeanCitations, 10).unwrap();
        assert_eq!(b.bin_sizes(), vec![10; 10]);
        assert!(b.prior().iter().all(|&p| (p - 0.1).abs() < 1e-15));
        assert_eq!(b.assignment()[0], 0);
        assert_eq!(b.assignment()[99], 9);

        let c = corpus_of(101, |i| vec![i as u64]);
        let b = bin_authors(&c, IndicatorKind::MeanCitations, 10).unwrap();
        let sizes = b.bin_sizes();
        assert_eq!(sizes[0], 11);
        assert!(sizes[1..].iter().all(|&s| s == 10));
        assert!((b.prior().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((b.prior()[0] - 11.0 / 101.0).abs() < 1e-15);
    }

    #[test]
    fn equal_values_fall_back_to_author_id_order() {
        let ids = ["d", "b", "a", "c"];
        let c = Corpus::new(ids.iter().map(|id| CitationRecord::from_citations(*id, &[3])).collect()).unwrap();
        let b = bin_authors(&c, IndicatorKind::MeanCitations, 2).unwrap();
        // a, b -> bin 0; c, d -> bin 1
        assert_eq!(b.assignment(), &[1, 0, 0, 1]);
    }

    #[test]
    fn binning_errors() {
        let c = corpus_of(5, |i| vec![i as u64]);
        assert!(matches!(
            bin_authors(&c, IndicatorKind::MeanCitations, 10),
            Err(Error::TooFewAuthors { authors: 5, bins: 10 })
        ));
        let c = Corpus::new(vec![
            CitationRecord::from_citations("x", &[1]),
            CitationRecord::from_citations("y", &[]),
            CitationRecord::from_citations("z", &[2]),
        ])
        .unwrap();
        match bin_authors(&c, IndicatorKind::HIndex, 2) {
            Err(Error::IndicatorUndefined(ids)) => assert_eq!(ids, vec!["y".to_string()]),
            other => panic!("{other:?}"),
        }
        assert!(bin_authors(&c, BinningKey::Hash, 1).is_err());
    }

    #[test]
    fn binning_ignores_monotone_transforms() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let values: Vec<u64> = (0..200).map(|_| rng.random_range(0..50)).collect();
        let plain = corpus_of(200, |i| vec![values[i]]);
        let cubed = corpus_of(200, |i| vec![values[i].pow(3)]);
        let a = bin_authors(&plain, IndicatorKind::MaxCitations, 7).unwrap();
        let b = bin_authors(&cubed, IndicatorKind::MaxCitations, 7).unwrap();
        assert_eq!(a.assignment(), b.assignment());
    }

    #[test]
    fn conditional_smoothing_arithmetic() {
        let c = Corpus::new(vec![CitationRecord::from_citations("x", &[0, 0, 5])]).unwrap();
        let b = AuthorBinning::from_assignment(vec![0], 1).unwrap();
        let cond = conditional_distributions(&c, &b, &BinningScheme::table1(), 0.5).unwrap();
        let expect = [2.5 / 6.0, 1.5 / 6.0, 0.5 / 6.0, 0.5 / 6.0, 0.5 / 6.0, 0.5 / 6.0];
        for (got, want) in cond.rows()[0].probabilities().iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((expect[0] - 0.4167).abs() < 1e-4);
    }

    #[test]
    fn single_bin_conditional_is_corpus_distribution() {
        let c = corpus_of(30, |i| vec![i as u64 * 7, i as u64 % 3, 120]);
        let b = AuthorBinning::from_assignment(vec![0; 30], 1).unwrap();
        let s = BinningScheme::table1();
        let cond = conditional_distributions(&c, &b, &s, 0.0).unwrap();
        let whole = crate::corpus::empirical_distribution(c.papers(), &s).unwrap();
        assert_eq!(cond.rows()[0], whole);
    }

    #[test]
    fn indicator_row_without_smoothing() {
        let c = corpus_of(4, |i| if i < 2 { vec![150, 200] } else { vec![0, 3] });
        let b = AuthorBinning::from_assignment(vec![1, 1, 0, 0], 2).unwrap();
        let cond = conditional_distributions(&c, &b, &BinningScheme::table1(), 0.0).unwrap();
        assert_eq!(cond.rows()[1].probabilities(), &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn empty_bin_needs_pseudocount() {
        let c = corpus_of(2, |_| vec![1]);
        let b = AuthorBinning::from_assignment(vec![0, 0], 2).unwrap();
        let s = BinningScheme::table1();
        assert!(matches!(
            conditional_distributions(&c, &b, &s, 0.0),
            Err(Error::EmptyAuthorBin(1))
        ));
        let cond = conditional_distributions(&c, &b, &s, 0.5).unwrap();
        assert!(cond.rows()[1].probabilities().iter().all(|&p| (p - 1.0 / 6.0).abs() < 1e-15));
        assert!(conditional_distributions(&c, &b, &s, -1.0).is_err());
    }

    #[test]
    fn two_bin_bayes_arithmetic() {
        let cond = ConditionalDistributions::from_rows(vec![dist(&[0.9, 0.1]), dist(&[0.1, 0.9])], two_bin_scheme()).unwrap();
        let p = posterior(&BinnedRecord::new(vec![1, 0]), &cond, &[0.5, 0.5]).unwrap();
        assert!((p.probabilities()[0] - 0.9).abs() < 1e-12);
        assert!((p.probabilities()[1] - 0.1).abs() < 1e-12);
        let p = posterior(&BinnedRecord::new(vec![2, 0]), &cond, &[0.5, 0.5]).unwrap();
        assert!((p.probabilities()[0] - 0.81 / 0.82).abs() < 1e-12);
        assert!((p.probabilities()[0] - 0.9878).abs() < 1e-4);
        assert!((p.probabilities()[1] - 0.0122).abs() < 1e-4);
    }

    #[test]
    fn identical_rows_return_the_prior() {
        let row = CitationDistribution::table1().renormalized();
        let cond = ConditionalDistributions::from_rows(vec![row; 4], BinningScheme::table1()).unwrap();
        let prior = [0.1, 0.2, 0.3, 0.4];
        let p = posterior(&BinnedRecord::new(vec![3, 2, 7, 0, 1, 1]), &cond, &prior).unwrap();
        for (a, b) in p.probabilities().iter().zip(prior) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_errors_and_support() {
        let cond = ConditionalDistributions::from_rows(vec![dist(&[1.0, 0.0]), dist(&[0.5, 0.5])], two_bin_scheme()).unwrap();
        assert!(posterior(&BinnedRecord::new(vec![1, 0, 0]), &cond, &[0.5, 0.5]).is_err());
        assert!(posterior(&BinnedRecord::new(vec![1, 0]), &cond, &[1.0]).is_err());
        assert!(posterior(&BinnedRecord::new(vec![1, 0]), &cond, &[0.7, 0.7]).is_err());
        let p = posterior(&BinnedRecord::new(vec![0, 3]), &cond, &[0.5, 0.5]).unwrap();
        assert_eq!(p.probabilities(), &[0.0, 1.0]);
        let only = ConditionalDistributions::from_rows(vec![dist(&[1.0, 0.0])], two_bin_scheme()).unwrap();
        assert!(matches!(
            posterior(&BinnedRecord::new(vec![0, 2]), &only, &[1.0]),
            Err(Error::OutsideSupport { bin: 1, .. })
        ));
    }

    #[test]
    fn single_author_bin_gives_unit_matrix() {
        let c = corpus_of(3, |i| vec![i as u64, 20]);
        let b = AuthorBinning::from_assignment(vec![0; 3], 1).unwrap();
        let cond = conditional_distributions(&c, &b, &BinningScheme::table1(), 0.5).unwrap();
        let m = confusion_matrix(&c, &b, &cond, false).unwrap();
        assert_eq!(m.rows(), &[vec![1.0]]);
        assert_eq!(m.author_counts(), &[3]);
    }

    #[test]
    fn leave_one_out_removes_self_contribution() {
        // Two bins that differ only through one author's papers.
        let c = Corpus::new(vec![
            CitationRecord::from_citations("lo1", &[0, 0, 0]),
            CitationRecord::from_citations("lo2", &[0, 0, 0]),
            CitationRecord::from_citations("hi1", &[0, 0, 0]),
            CitationRecord::from_citations("hi2", &[200, 300, 400]),
        ])
        .unwrap();
        let b = AuthorBinning::from_assignment(vec![0, 0, 1, 1], 2).unwrap();
        let cond = conditional_distributions(&c, &b, &BinningScheme::table1(), 0.5).unwrap();
        let plain = author_posteriors(&c, &b, &cond, false).unwrap();
        let loo = author_posteriors(&c, &b, &cond, true).unwrap();
        assert!(loo[3].posterior.probabilities()[1] < plain[3].posterior.probabilities()[1]);
        // bin 0 authors: removing their own zeros makes bin 0 less favourable
        assert!(loo[0].posterior.probabilities()[0] < plain[0].posterior.probabilities()[0]);
        for ap in loo.iter().chain(&plain) {
            assert!((ap.posterior.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn metrics_examples() {
        let ident = ConfusionMatrix::from_rows(
            (0..3).map(|i| (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect(),
            vec![4, 4, 4],
        )
        .unwrap();
        let m = assignment_metrics(&ident, &[]);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.mean_correct_mass, 1.0);

        let uniform = ConfusionMatrix::from_rows(vec![vec![0.1; 10]; 10], vec![5; 10]).unwrap();
        let m = assignment_metrics(&uniform, &[]);
        assert!((m.mean_correct_mass - 0.1).abs() < 1e-12);

        let posteriors: Vec<AuthorPosterior> = (0..4)
            .map(|i| AuthorPosterior {
                author_id: format!("a{i}"),
                assigned: usize::from(i >= 2),
                posterior: Posterior {
                    probabilities: if i >= 2 { vec![0.1, 0.9] } else { vec![0.6, 0.4] },
                },
            })
            .collect();
        let matrix = ConfusionMatrix::from_posteriors(2, &posteriors).unwrap();
        let m = assignment_metrics(&matrix, &posteriors);
        assert!((m.per_bin[1].mean_correct_mass - 0.9).abs() < 1e-12);
        assert!((m.per_bin[0].mean_correct_mass - 0.6).abs() < 1e-12);
        assert_eq!(m.accuracy, 1.0);
        assert!((m.mean_correct_mass - 0.75).abs() < 1e-12);
    }

    #[test]
    fn confusion_csv_layout() {
        let m = ConfusionMatrix::from_rows(vec![vec![0.75, 0.25], vec![0.5, 0.5]], vec![3, 2]).unwrap();
        assert_eq!(m.to_csv(), "assigned,0,1,authors\n0,0.75,0.25,3\n1,0.5,0.5,2\n");
        assert!(m.is_diagonal_dominant());
        let m = ConfusionMatrix::from_rows(vec![vec![0.25, 0.75], vec![0.5, 0.5]], vec![3, 2]).unwrap();
        assert!(!m.is_diagonal_dominant());
    }

    #[test]
    fn kl_examples() {
        let p = dist(&[0.9, 0.1]);
        let q = dist(&[0.1, 0.9]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let expect = 0.8 * 9f64.ln();
        assert!((kl_divergence(&p, &q).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 1.7578).abs() < 1e-4);
        let gap = dist(&[1.0, 0.0]);
        assert!((kl_divergence(&gap, &p).unwrap() - (1.0 / 0.9f64).ln()).abs() < 1e-15);
        assert!(matches!(kl_divergence(&p, &gap), Err(Error::KlSupport { index: 1 })));
        assert!(kl_divergence(&p, &CitationDistribution::table1()).is_err());
    }

    #[test]
    fn kl_is_non_negative_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let k = rng.random_range(2..9);
            let w1: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            let w2: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-9).collect();
            let p = CitationDistribution::from_weights(&w1).unwrap();
            let q = CitationDistribution::from_weights(&w2).unwrap();
            assert!(kl_divergence(&p, &q).unwrap() >= 0.0);
        }
    }

    #[test]
    fn hash_key_parses() {
        assert_eq!("hash".parse::<BinningKey>().unwrap(), BinningKey::Hash);
        assert_eq!(
            "h_index".parse::<BinningKey>().unwrap(),
            BinningKey::Indicator(IndicatorKind::HIndex)
        );
        assert!("shoe_size".parse::<BinningKey>().is_err());
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn curve_argument_errors() {
        let c = corpus_of(20, |i| vec![i as u64; 5]);
        let s = BinningScheme::table1();
        let mut cfg = CurveConfig {
            key: IndicatorKind::MeanCitations.into(),
            num_bins: 2,
            pseudocount: 0.5,
            ns: vec![],
            trials: 1,
            seed: 1,
        };
        assert!(matches!(accuracy_curve(CurveSource::Corpus { corpus: &c, scheme: &s }, &cfg), Err(Error::EmptyNList)));
        cfg.ns = vec![3, 6];
        assert!(matches!(
            accuracy_curve(CurveSource::Corpus { corpus: &c, scheme: &s }, &cfg),
            Err(Error::InsufficientPapers { requested: 6, .. })
        ));
        cfg.ns = vec![0];
        assert!(accuracy_curve(CurveSource::Corpus { corpus: &c, scheme: &s }, &cfg).is_err());
    }

    #[test]
    fn full_length_curve_matches_confusion_metrics() {
        let c = corpus_of(40, |i| (0..8).map(|j| ((i * 37 + j * 11) % (5 + 10 * i)) as u64).collect());
        let s = BinningScheme::table1();
        let cfg = CurveConfig {
            key: IndicatorKind::MeanCitations.into(),
            num_bins: 4,
            pseudocount: 0.5,
            ns: vec![8],
            trials: 1,
            seed: 99,
        };
        let curve = accuracy_curve(CurveSource::Corpus { corpus: &c, scheme: &s }, &cfg).unwrap();
        let b = bin_authors(&c, cfg.key, 4).unwrap();
        let cond = conditional_distributions(&c, &b, &s, 0.5).unwrap();
        let post = author_posteriors(&c, &b, &cond, false).unwrap();
        let m = assignment_metrics(&ConfusionMatrix::from_posteriors(4, &post).unwrap(), &post);
        assert_eq!(curve[0].accuracy, m.accuracy);
        assert!((curve[0].mean_correct_mass - m.mean_correct_mass).abs() < 1e-12);
    }

    #[test]
    fn slope_of_exact_exponential() {
        let pts: Vec<CurvePoint> = [1usize, 2, 4, 8]
            .iter()
            .map(|&n| CurvePoint {
                n,
                accuracy: 0.0,
                mean_correct_mass: 1.0 - (-0.3 * n as f64).exp(),
            })
            .collect();
        assert!((ln_error_slope(&pts) + 0.3).abs() < 1e-12);
    }
}
