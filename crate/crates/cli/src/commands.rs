use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use citestat::bayes::{adjacent_kl, AssignmentMetrics};
use citestat::homogeneity::{pairwise_reports, records_by_field, HomogeneityReport};
use citestat::synthetic::{sample_two_field_corpus, separated_model, DEFAULT_SEPARATION};
use citestat::{
    accuracy_curve, assignment_metrics, author_posteriors, bin_authors, conditional_distributions,
    cross_field_rank, ln_error_slope, load_corpus, preset_model, sample_corpus, unlikelihood_r, write_corpus,
    BinningKey, BinningScheme, CitationDistribution, ConfusionMatrix, Corpus, CrossFieldRank, CurveConfig,
    CurvePoint, CurveSource, FieldPartition, Format, GenerativeModel, PapersPerAuthor, Seed,
};

use crate::output::{emit, json, write_file, Table};
use crate::{InputFormat, OutputFormat, Shared, SimulationSource};

const TWO_FIELD: &str = "two_field";

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn input_format(shared: &Shared, path: &Path) -> Format {
    match shared.input_format {
        Some(InputFormat::Json) => Format::Json,
        Some(InputFormat::Csv) => Format::Csv,
        None if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => Format::Json,
        None => Format::Csv,
    }
}

fn load_input(shared: &Shared) -> Result<Corpus> {
    let path = shared
        .input
        .as_deref()
        .ok_or_else(|| anyhow!("--input is required"))?;
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    load_corpus(file, input_format(shared, path)).with_context(|| format!("invalid corpus {}", path.display()))
}

fn load_scheme(shared: &Shared) -> Result<Option<BinningScheme>> {
    shared
        .bins
        .as_deref()
        .map(|path| {
            BinningScheme::from_json(&read_bytes(path)?).with_context(|| format!("invalid bins {}", path.display()))
        })
        .transpose()
}

fn model_for(preset: &str, separation: Option<f64>, papers: Option<usize>) -> Result<GenerativeModel> {
    let model = match (preset, separation) {
        ("separated", g) => separated_model(g.unwrap_or(DEFAULT_SEPARATION)),
        (_, Some(_)) => bail!("--separation only applies to the separated preset"),
        (name, None) => preset_model(name)?,
    };
    Ok(match papers {
        Some(0) => bail!("--papers must be positive"),
        Some(n) => model.with_papers_per_author(PapersPerAuthor::Fixed(n)),
        None => model,
    })
}

/// The corpus and citation-bin scheme an analysis runs on.
fn analysis_input(shared: &Shared, source: &SimulationSource) -> Result<(Corpus, BinningScheme)> {
    let scheme = load_scheme(shared)?;
    match &source.simulate {
        Some(preset) => {
            if shared.input.is_some() {
                bail!("--simulate and --input are mutually exclusive");
            }
            let model = model_for(preset, source.separation, source.papers)?;
            let corpus = sample_corpus(&model, source.authors, Seed(shared.seed))?.corpus;
            Ok((corpus, scheme.unwrap_or_else(|| model.scheme().clone())))
        }
        None => Ok((load_input(shared)?, scheme.unwrap_or_default())),
    }
}

fn float(x: f64) -> String {
    format!("{x:.6}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub author_id: String,
    pub papers: u64,
    pub counts: Vec<u64>,
    pub log10_probability: f64,
    pub r: f64,
}

pub fn score(shared: &Shared, distribution: Option<&Path>, renormalize: bool) -> Result<()> {
    let corpus = load_input(shared)?;
    let scheme = load_scheme(shared)?.unwrap_or_default();
    let mut dist = match distribution {
        Some(path) => serde_json::from_slice::<CitationDistribution>(&read_bytes(path)?)
            .with_context(|| format!("invalid distribution {}", path.display()))?,
        None => CitationDistribution::table1(),
    };
    if renormalize {
        dist = dist.renormalized();
    }
    if dist.num_bins() != scheme.num_bins() {
        bail!(
            "distribution has {} bins but the binning scheme has {}",
            dist.num_bins(),
            scheme.num_bins()
        );
    }

    let mut rows = corpus
        .authors()
        .iter()
        .map(|author| {
            let binned = scheme.bin_record(author);
            let u = unlikelihood_r(&binned, &dist).with_context(|| format!("author {}", author.author_id))?;
            Ok(ScoreRow {
                author_id: author.author_id.clone(),
                papers: binned.total(),
                counts: binned.counts().to_vec(),
                log10_probability: u.log10_record,
                r: u.r,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.r.total_cmp(&a.r).then_with(|| a.author_id.cmp(&b.author_id)));

    let text = match shared.format {
        OutputFormat::Json => json(&rows)?,
        format => {
            let mut headers = vec!["author_id".to_string(), "N".to_string()];
            headers.extend((0..scheme.num_bins()).map(|i| format!("n{i}")));
            headers.extend(["log10_P".to_string(), "r".to_string()]);
            let mut table = Table::new(headers);
            for row in &rows {
                let mut cells = vec![row.author_id.clone(), row.papers.to_string()];
                cells.extend(row.counts.iter().map(u64::to_string));
                if format == OutputFormat::Table {
                    cells.extend([format!("{:.3}", row.log10_probability), format!("{:.3}", row.r)]);
                } else {
                    cells.extend([format!("{:?}", row.log10_probability), format!("{:?}", row.r)]);
                }
                table.push(cells);
            }
            if format == OutputFormat::Csv {
                table.csv()?
            } else {
                table.text()
            }
        }
    };
    emit(shared.out.as_deref(), &text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub indicator: BinningKey,
    pub authors: usize,
    pub num_bins: usize,
    pub pseudocount: f64,
    pub leave_one_out: bool,
    pub confusion: ConfusionMatrix,
    pub metrics: AssignmentMetrics,
    /// `nats` or `bits`.
    pub kl_unit: String,
    pub adjacent_kl: Vec<f64>,
}

pub fn eval_indicator(shared: &Shared, source: &SimulationSource, matrix_out: Option<&Path>, kl_bits: bool) -> Result<()> {
    let (corpus, scheme) = analysis_input(shared, source)?;
    let binning = bin_authors(&corpus, shared.indicator, shared.num_bins)?;
    let conditionals = conditional_distributions(&corpus, &binning, &scheme, shared.pseudocount)?;
    let posteriors = author_posteriors(&corpus, &binning, &conditionals, shared.leave_one_out)?;
    let confusion = ConfusionMatrix::from_posteriors(binning.num_bins(), &posteriors)?;
    let metrics = assignment_metrics(&confusion, &posteriors);
    let scale = if kl_bits { std::f64::consts::LOG2_E } else { 1.0 };
    let kl: Vec<f64> = adjacent_kl(&conditionals)?.into_iter().map(|d| d * scale).collect();

    if let Some(path) = matrix_out {
        write_file(path, &confusion.to_csv())?;
    }
    let report = EvalReport {
        indicator: shared.indicator,
        authors: corpus.len(),
        num_bins: binning.num_bins(),
        pseudocount: shared.pseudocount,
        leave_one_out: shared.leave_one_out,
        confusion,
        metrics,
        kl_unit: if kl_bits { "bits" } else { "nats" }.to_string(),
        adjacent_kl: kl,
    };
    let text = match shared.format {
        OutputFormat::Json => json(&report)?,
        OutputFormat::Csv => eval_csv(&report)?,
        OutputFormat::Table => eval_text(&report),
    };
    emit(shared.out.as_deref(), &text)
}

fn metrics_table(report: &EvalReport) -> Table {
    let mut t = Table::new(["bin", "authors", "argmax_accuracy", "mean_correct_mass"]);
    for b in &report.metrics.per_bin {
        t.push([b.bin.to_string(), b.authors.to_string(), float(b.accuracy), float(b.mean_correct_mass)]);
    }
    t.push([
        "all".to_string(),
        report.authors.to_string(),
        float(report.metrics.accuracy),
        float(report.metrics.mean_correct_mass),
    ]);
    t
}

fn kl_table(report: &EvalReport) -> Table {
    let mut t = Table::new(["from", "to", format!("kl_{}", report.kl_unit).as_str()]);
    for (a, d) in report.adjacent_kl.iter().enumerate() {
        t.push([a.to_string(), (a + 1).to_string(), float(*d)]);
    }
    t
}

fn eval_csv(report: &EvalReport) -> Result<String> {
    Ok(format!(
        "{}\n{}\n{}",
        report.confusion.to_csv(),
        metrics_table(report).csv()?,
        kl_table(report).csv()?
    ))
}

fn eval_text(report: &EvalReport) -> String {
    let k = report.num_bins;
    let mut confusion = Table::new(
        std::iter::once("assigned\\inferred".to_string())
            .chain((0..k).map(|a| a.to_string()))
            .chain(std::iter::once("authors".to_string())),
    );
    for (b, row) in report.confusion.rows().iter().enumerate() {
        confusion.push(
            std::iter::once(b.to_string())
                .chain(row.iter().map(|p| format!("{p:.3}")))
                .chain(std::iter::once(report.confusion.author_counts()[b].to_string())),
        );
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "indicator {}  authors {}  bins {}  pseudocount {}  leave-one-out {}",
        report.indicator, report.authors, k, report.pseudocount, report.leave_one_out
    );
    out.push_str("\nconfusion P(inferred | assigned)\n");
    out.push_str(&confusion.text());
    out.push_str("\nassignment metrics\n");
    out.push_str(&metrics_table(report).text());
    let _ = writeln!(out, "\nadjacent-bin KL ({})", report.kl_unit);
    out.push_str(&kl_table(report).text());
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub points: Vec<CurvePoint>,
    pub ln_error_slope: f64,
}

pub fn curve(shared: &Shared, source: &SimulationSource, ns: &[usize], trials: usize) -> Result<()> {
    if ns.is_empty() {
        return Err(citestat::Error::EmptyNList.into());
    }
    let config = CurveConfig {
        key: shared.indicator,
        num_bins: shared.num_bins,
        pseudocount: shared.pseudocount,
        ns: ns.to_vec(),
        trials,
        seed: shared.seed,
    };
    let points = match &source.simulate {
        Some(preset) => {
            if shared.input.is_some() {
                bail!("--simulate and --input are mutually exclusive");
            }
            let mut model = model_for(preset, source.separation, None)?;
            if let Some(scheme) = load_scheme(shared)? {
                model = GenerativeModel::new(model.classes().to_vec(), model.papers_per_author(), scheme)?;
            }
            accuracy_curve(
                CurveSource::Model {
                    model: &model,
                    num_authors: source.authors,
                },
                &config,
            )?
        }
        None => {
            let corpus = load_input(shared)?;
            let scheme = load_scheme(shared)?.unwrap_or_default();
            accuracy_curve(
                CurveSource::Corpus {
                    corpus: &corpus,
                    scheme: &scheme,
                },
                &config,
            )?
        }
    };
    let slope = ln_error_slope(&points);
    let text = match shared.format {
        OutputFormat::Json => json(&CurveReport {
            points,
            ln_error_slope: slope,
        })?,
        _ => {
            let mut out = String::from("N\targmax_accuracy\tmean_correct_mass\n");
            for p in &points {
                let _ = writeln!(out, "{}\t{}\t{}", p.n, float(p.accuracy), float(p.mean_correct_mass));
            }
            let _ = writeln!(out, "# ln_error_slope\t{}", float(slope));
            out
        }
    };
    emit(shared.out.as_deref(), &text)
}

pub fn homogeneity(shared: &Shared) -> Result<()> {
    let corpus = load_input(shared)?;
    let scheme = load_scheme(shared)?.unwrap_or_default();
    let partition = FieldPartition::from_corpus(&corpus)?;
    if partition.len() < 2 {
        eprintln!(
            "notice: {} field(s) in the corpus, nothing to compare",
            partition.len()
        );
    }
    let reports = pairwise_reports(&partition, &scheme)?;
    let text = match shared.format {
        OutputFormat::Json => json(&reports)?,
        OutputFormat::Csv => {
            let mut t = Table::new(["field_a", "field_b", "mean_ratio", "chi_square", "df", "p_value"]);
            for r in &reports {
                t.push([
                    r.field_a.clone(),
                    r.field_b.clone(),
                    r.mean_ratio.map(|x| format!("{x:?}")).unwrap_or_default(),
                    format!("{:?}", r.chi_square),
                    r.degrees_of_freedom.to_string(),
                    format!("{:?}", r.p_value),
                ]);
            }
            t.csv()?
        }
        OutputFormat::Table => reports.iter().map(report_text).collect::<Vec<_>>().join("\n"),
    };
    emit(shared.out.as_deref(), &text)
}

fn report_text(r: &HomogeneityReport) -> String {
    let mut t = Table::new(["quantity", "value"]);
    t.push(["fields".to_string(), format!("{} vs {}", r.field_a, r.field_b)]);
    t.push([
        "mean_ratio".to_string(),
        r.mean_ratio.map(float).unwrap_or_else(|| "undefined".to_string()),
    ]);
    t.push(["chi_square".to_string(), float(r.chi_square)]);
    t.push(["degrees_of_freedom".to_string(), r.degrees_of_freedom.to_string()]);
    t.push(["p_value".to_string(), format!("{:.3e}", r.p_value)]);
    t.text()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorRank {
    pub author_id: String,
    #[serde(flatten)]
    pub rank: CrossFieldRank,
}

pub fn rank(shared: &Shared) -> Result<()> {
    let BinningKey::Indicator(kind) = shared.indicator else {
        bail!("rank needs a citation indicator, not {}", shared.indicator);
    };
    let corpus = load_input(shared)?;
    let partition = FieldPartition::from_corpus(&corpus)?;
    let ranks = corpus
        .authors()
        .iter()
        .map(|author| {
            let records = records_by_field(author)?;
            let rank = cross_field_rank(&records, &partition, kind)
                .with_context(|| format!("author {}", author.author_id))?;
            Ok(AuthorRank {
                author_id: author.author_id.clone(),
                rank,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let text = match shared.format {
        OutputFormat::Json => json(&ranks)?,
        format => {
            let mut t = Table::new(["author_id", "field", "papers", "percentile"]);
            let show = |x: f64| if format == OutputFormat::Csv { format!("{x:?}") } else { float(x) };
            for r in &ranks {
                for f in &r.rank.per_field {
                    t.push([r.author_id.clone(), f.field.clone(), f.papers.to_string(), show(f.percentile)]);
                }
                let papers: usize = r.rank.per_field.iter().map(|f| f.papers).sum();
                t.push([r.author_id.clone(), "combined".to_string(), papers.to_string(), show(r.rank.combined)]);
            }
            if format == OutputFormat::Csv {
                t.csv()?
            } else {
                t.text()
            }
        }
    };
    emit(shared.out.as_deref(), &text)
}

pub struct SimulateArgs {
    pub preset: String,
    pub model: Option<PathBuf>,
    pub authors: usize,
    pub papers: Option<usize>,
    pub separation: Option<f64>,
    pub scale: f64,
    pub truth_out: Option<PathBuf>,
}

pub fn simulate(shared: &Shared, args: &SimulateArgs) -> Result<()> {
    let seed = Seed(shared.seed);
    let (corpus, truth) = if let Some(path) = &args.model {
        let mut model = GenerativeModel::from_json(&read_bytes(path)?)
            .with_context(|| format!("invalid model {}", path.display()))?;
        if let Some(n) = args.papers {
            model = model.with_papers_per_author(PapersPerAuthor::Fixed(n));
        }
        let s = sample_corpus(&model, args.authors, seed)?;
        (s.corpus, Some(s.true_class))
    } else if args.preset == TWO_FIELD {
        let model = model_for("homogeneous", args.separation, args.papers)?;
        (sample_two_field_corpus(&model, args.authors, args.scale, seed)?, None)
    } else {
        let model = model_for(&args.preset, args.separation, args.papers)?;
        let s = sample_corpus(&model, args.authors, seed)?;
        (s.corpus, Some(s.true_class))
    };

    if let Some(path) = &args.truth_out {
        let classes = truth.ok_or_else(|| anyhow!("the {TWO_FIELD} preset has no author classes"))?;
        let mut t = Table::new(["author_id", "true_class"]);
        for (author, class) in corpus.authors().iter().zip(classes) {
            t.push([author.author_id.clone(), class.to_string()]);
        }
        write_file(path, &t.csv()?)?;
    }

    let format = if shared.format == OutputFormat::Json {
        Format::Json
    } else {
        Format::Csv
    };
    let mut buffer = Vec::new();
    write_corpus(&corpus, &mut buffer, format)?;
    emit(shared.out.as_deref(), &String::from_utf8(buffer)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use citestat::{sample_corpus, IndicatorKind};

    fn round_trip<T: Serialize + for<'de> Deserialize<'de> + PartialEq + std::fmt::Debug>(value: &T) {
        let text = json(value).unwrap();
        assert_eq!(&serde_json::from_str::<T>(&text).unwrap(), value);
    }

    #[test]
    fn reports_round_trip_through_json() {
        let model = separated_model(0.4).with_papers_per_author(PapersPerAuthor::Fixed(12));
        let corpus = sample_corpus(&model, 60, Seed(5)).unwrap().corpus;
        let scheme = BinningScheme::table1();
        let binning = bin_authors(&corpus, IndicatorKind::HIndex, 4).unwrap();
        let conditionals = conditional_distributions(&corpus, &binning, &scheme, 0.5).unwrap();
        let posteriors = author_posteriors(&corpus, &binning, &conditionals, true).unwrap();
        let confusion = ConfusionMatrix::from_posteriors(4, &posteriors).unwrap();
        let metrics = assignment_metrics(&confusion, &posteriors);
        round_trip(&EvalReport {
            indicator: BinningKey::Hash,
            authors: corpus.len(),
            num_bins: 4,
            pseudocount: 0.5,
            leave_one_out: true,
            confusion,
            metrics,
            kl_unit: "nats".into(),
            adjacent_kl: adjacent_kl(&conditionals).unwrap(),
        });
        round_trip(&ScoreRow {
            author_id: "a".into(),
            papers: 3,
            counts: vec![1, 2, 0],
            log10_probability: -0.1 / 3.0,
            r: std::f64::consts::PI,
        });
        round_trip(&CurveReport {
            points: vec![CurvePoint {
                n: 5,
                accuracy: 1.0 / 3.0,
                mean_correct_mass: 0.7,
            }],
            ln_error_slope: -1e-7,
        });
        round_trip(&corpus);
    }
}
