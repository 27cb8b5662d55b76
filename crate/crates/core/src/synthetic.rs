//! Seeded generative corpora with a known author class.
//!
//! Every author draws from a private ChaCha stream keyed by the master seed
//! and the author index, so a corpus is the same whether authors are
//! generated sequentially, in parallel, or in a different order.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{BinningScheme, CitationRecord, Corpus, Paper};
use crate::improbability::CitationDistribution;
use crate::{Error, Result};

/// Default tilt strength `g` of the `separated` preset.
pub const DEFAULT_SEPARATION: f64 = 0.4;
pub const SEPARATED_CLASSES: usize = 10;
pub const DEFAULT_PAPERS_PER_AUTHOR: usize = 50;

/// The sampling ceiling of the open last bin is this multiple of its lower
/// edge (500+ → 500..=5000 for the SPIRES bins).
pub const OPEN_BIN_SPAN: u64 = 10;

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent RNG stream for `keys` under `master`.
pub fn substream(master: u64, keys: &[u64]) -> ChaCha8Rng {
    let stream = keys.iter().fold(0u64, |acc, &k| splitmix64(acc ^ k));
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PapersPerAuthor {
    Fixed(usize),
    /// Inclusive range, drawn uniformly.
    Range(usize, usize),
}

impl PapersPerAuthor {
    fn validate(self) -> Result<()> {
        match self {
            PapersPerAuthor::Range(lo, hi) if lo > hi => {
                Err(Error::InvalidModel(format!("paper range {lo}..={hi} is empty")))
            }
            _ => Ok(()),
        }
    }

    fn draw(self, rng: &mut impl Rng) -> usize {
        match self {
            PapersPerAuthor::Fixed(n) => n,
            PapersPerAuthor::Range(lo, hi) => rng.random_range(lo..=hi),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelClass {
    pub weight: f64,
    pub probabilities: CitationDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDef", into = "ModelDef")]
pub struct GenerativeModel {
    classes: Vec<ModelClass>,
    papers_per_author: PapersPerAuthor,
    scheme: BinningScheme,
}

/// Wire form of [`GenerativeModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDef {
    classes: Vec<ModelClass>,
    papers_per_author: PapersPerAuthor,
    #[serde(default)]
    bins: Option<BinningScheme>,
}

impl TryFrom<ModelDef> for GenerativeModel {
    type Error = Error;

    fn try_from(def: ModelDef) -> Result<Self> {
        GenerativeModel::new(def.classes, def.papers_per_author, def.bins.unwrap_or_default())
    }
}

impl From<GenerativeModel> for ModelDef {
    fn from(m: GenerativeModel) -> Self {
        ModelDef {
            classes: m.classes,
            papers_per_author: m.papers_per_author,
            bins: Some(m.scheme),
        }
    }
}

impl GenerativeModel {
    pub fn new(classes: Vec<ModelClass>, papers_per_author: PapersPerAuthor, scheme: BinningScheme) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::InvalidModel("at least one class required".into()));
        }
        papers_per_author.validate()?;
        for (k, c) in classes.iter().enumerate() {
            if !c.weight.is_finite() || c.weight < 0.0 {
                return Err(Error::InvalidModel(format!("class {k} has weight {}", c.weight)));
            }
            if c.probabilities.num_bins() != scheme.num_bins() {
                return Err(Error::DimensionMismatch {
                    expected: scheme.num_bins(),
                    actual: c.probabilities.num_bins(),
                });
            }
        }
        let total: f64 = classes.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidModel(format!("class weights sum to {total}")));
        }
        Ok(Self {
            classes,
            papers_per_author,
            scheme,
        })
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn classes(&self) -> &[ModelClass] {
        &self.classes
    }

    pub fn papers_per_author(&self) -> PapersPerAuthor {
        self.papers_per_author
    }

    pub fn scheme(&self) -> &BinningScheme {
        &self.scheme
    }

    pub fn with_papers_per_author(mut self, papers: PapersPerAuthor) -> Self {
        self.papers_per_author = papers;
        self
    }
}

/// The SPIRES distribution tilted towards higher bins: `P_k(i) ∝ P(i)·exp(g·k·i)`.
pub fn tilted_table1(separation: f64, class: usize) -> CitationDistribution {
    let weights: Vec<f64> = CitationDistribution::table1()
        .probabilities()
        .iter()
        .enumerate()
        .map(|(i, p)| p * (separation * class as f64 * i as f64).exp())
        .collect();
    CitationDistribution::from_weights(&weights).expect("positive weights")
}

/// Ten equally weighted classes with increasing tilt.
pub fn separated_model(separation: f64) -> GenerativeModel {
    let classes = (0..SEPARATED_CLASSES)
        .map(|k| ModelClass {
            weight: 1.0 / SEPARATED_CLASSES as f64,
            probabilities: tilted_table1(separation, k),
        })
        .collect();
    GenerativeModel::new(
        classes,
        PapersPerAuthor::Fixed(DEFAULT_PAPERS_PER_AUTHOR),
        BinningScheme::table1(),
    )
    .expect("valid preset")
}

fn single_class(papers: usize) -> GenerativeModel {
    GenerativeModel::new(
        vec![ModelClass {
            weight: 1.0,
            probabilities: CitationDistribution::table1(),
        }],
        PapersPerAuthor::Fixed(papers),
        BinningScheme::table1(),
    )
    .expect("valid preset")
}

pub const PRESETS: [&str; 3] = ["separated", "homogeneous", "table1_global"];

/// Named models. `homogeneous` and `table1_global` both draw every paper
/// from the SPIRES distribution; they differ in default record length (50 vs 10 papers).
pub fn preset_model(name: &str) -> Result<GenerativeModel> {
    match name {
        "separated" => Ok(separated_model(DEFAULT_SEPARATION)),
        "homogeneous" => Ok(single_class(DEFAULT_PAPERS_PER_AUTHOR)),
        "table1_global" => Ok(single_class(10)),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// A generated corpus along with each author's synthetic class (corpus
/// order). The class exists only inside the generative model.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub true_class: Vec<usize>,
}

/// Uniform citation count inside `bin`.
pub fn draw_citations(scheme: &BinningScheme, bin: usize, rng: &mut impl Rng) -> u64 {
    let (lo, hi) = scheme.interval(bin);
    let hi = hi.unwrap_or_else(|| lo.saturating_mul(OPEN_BIN_SPAN).max(lo + 1));
    rng.random_range(lo..=hi)
}

pub fn author_id(index: usize) -> String {
    format!("a{index:06}")
}

struct Samplers {
    classes: WeightedIndex<f64>,
    bins: Vec<WeightedIndex<f64>>,
}

impl Samplers {
    fn new(model: &GenerativeModel) -> Result<Self> {
        let invalid = |e: rand::distr::weighted::Error| Error::InvalidModel(e.to_string());
        let classes = WeightedIndex::new(model.classes.iter().map(|c| c.weight)).map_err(invalid)?;
        let bins = model
            .classes
            .iter()
            .map(|c| WeightedIndex::new(c.probabilities.probabilities()).map_err(invalid))
            .collect::<Result<_>>()?;
        Ok(Self { classes, bins })
    }
}

fn sample_author(model: &GenerativeModel, samplers: &Samplers, seed: Seed, index: usize) -> (CitationRecord, usize) {
    let mut rng = substream(seed.0, &[index as u64]);
    let class = samplers.classes.sample(&mut rng);
    let n = model.papers_per_author.draw(&mut rng);
    let papers = (0..n)
        .map(|j| {
            let bin = samplers.bins[class].sample(&mut rng);
            Paper::new(format!("p{j}"), draw_citations(&model.scheme, bin, &mut rng))
        })
        .collect();
    (CitationRecord::new(author_id(index), papers), class)
}

pub fn sample_corpus(model: &GenerativeModel, num_authors: usize, seed: Seed) -> Result<SyntheticCorpus> {
    if num_authors == 0 {
        return Err(Error::TooFewAuthors { authors: 0, bins: 1 });
    }
    let samplers = Samplers::new(model)?;
    let (authors, true_class): (Vec<_>, Vec<_>) = (0..num_authors)
        .into_par_iter()
        .map(|i| sample_author(model, &samplers, seed, i))
        .unzip();
    Ok(SyntheticCorpus {
        corpus: Corpus::new(authors)?,
        true_class,
    })
}

/// Generates a single author by index; identical to the corresponding
/// entry of [`sample_corpus`].
pub fn sample_author_at(model: &GenerativeModel, seed: Seed, index: usize) -> Result<(CitationRecord, usize)> {
    let samplers = Samplers::new(model)?;
    Ok(sample_author(model, &samplers, seed, index))
}

pub const BASE_FIELD: &str = "base";
pub const INFLATED_FIELD: &str = "inflated";

/// Two independently drawn fields of `authors_per_field` authors each; in
/// the `inflated` field every citation count is multiplied by `scale`.
/// Author ids are prefixed by their field.
pub fn sample_two_field_corpus(
    model: &GenerativeModel,
    authors_per_field: usize,
    scale: f64,
    seed: Seed,
) -> Result<Corpus> {
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::InvalidModel(format!("scale {scale} must be positive")));
    }
    let base = sample_corpus(model, authors_per_field, Seed(splitmix64(seed.0 ^ 1)))?.corpus;
    let inflated = sample_corpus(model, authors_per_field, Seed(splitmix64(seed.0 ^ 2)))?.corpus;
    fn tag(corpus: Corpus, field: &'static str, factor: f64) -> impl Iterator<Item = CitationRecord> {
        corpus.into_authors().into_iter().map(move |a| {
            let papers = a
                .papers
                .into_iter()
                .map(|p| {
                    let citations = (p.citations as f64 * factor).round() as u64;
                    Paper { citations, ..p }.with_field(field)
                })
                .collect();
            CitationRecord::new(format!("{field}-{}", a.author_id), papers)
        })
    }
    let authors = tag(base, BASE_FIELD, 1.0)
        .chain(tag(inflated, INFLATED_FIELD, scale))
        .collect();
    Corpus::new(authors)
}
