//! Citation-record statistics.
//!
//! - [`improbability`]: multinomial probability of a binned record and the
//!   unlikelihood `r` against the most probable record of the same size.
//! - [`indicators`]: scalar author measures (mean, median, h-index, ...).
//! - [`bayes`]: bins authors by an indicator, builds per-bin citation
//!   distributions and measures how well Bayesian reassignment recovers
//!   the bins. This is how indicators are compared.
//! - [`synthetic`]: seeded generative corpora with a known author class.
//! - [`homogeneity`]: cross-field tests and percentile-based ranking.
//!
//! ```
//! use citestat::{unlikelihood_r, BinningScheme, CitationDistribution, CitationRecord};
//!
//! let author = CitationRecord::from_citations("A", &[100; 10]);
//! let binned = BinningScheme::table1().bin_record(&author);
//! let u = unlikelihood_r(&binned, &CitationDistribution::table1()).unwrap();
//! assert!((u.r - 14.4).abs() < 0.1);
//! ```

pub mod bayes;
pub mod corpus;
mod error;
pub mod homogeneity;
pub mod improbability;
pub mod indicators;
pub mod special;
pub mod synthetic;

pub use bayes::{
    accuracy_curve, assignment_metrics, author_posteriors, bin_authors, conditional_distributions,
    confusion_matrix, kl_divergence, ln_error_slope, posterior, AssignmentMetrics, AuthorBinning,
    AuthorPosterior, BinningKey, ConditionalDistributions, ConfusionMatrix, CurveConfig, CurvePoint,
    CurveSource, Posterior,
};
pub use corpus::{
    bin_paper, bin_record, empirical_distribution, load_corpus, write_corpus, BinnedRecord,
    BinningScheme, CitationRecord, Corpus, Format, Paper,
};
pub use error::{Error, Result};
pub use homogeneity::{
    chi_square_homogeneity, cross_field_rank, mean_ratio, percentile_of, ChiSquareTest,
    CrossFieldRank, FieldPartition, HomogeneityReport,
};
pub use improbability::{
    log_max_probability, log_record_probability, unlikelihood_r, CitationDistribution, Unlikelihood,
};
pub use indicators::{evaluate, IndicatorKind, IndicatorValue};
pub use synthetic::{preset_model, sample_corpus, GenerativeModel, PapersPerAuthor, Seed, SyntheticCorpus};

/// Every way to place `n` indistinguishable papers into `bins` bins, in
/// lexicographic order.
pub fn compositions(n: u64, bins: usize) -> Vec<Vec<u64>> {
    fn fill(remaining: u64, slot: usize, current: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if slot + 1 == current.len() {
            current[slot] = remaining;
            out.push(current.clone());
            return;
        }
        for k in 0..=remaining {
            current[slot] = k;
            fill(remaining - k, slot + 1, current, out);
        }
    }
    let mut out = Vec::new();
    if bins == 0 {
        return out;
    }
    fill(n, 0, &mut vec![0; bins], &mut out);
    out
}
