//! Evaluation runs over a corpus of predictions and expert references.
//!
//! Confusion matrices are accumulated per (image, expert) pair, merged, and
//! normalized once. Boundary scores are computed per pair and aggregated
//! with image sizes as weights. Pairs are processed in sorted name order so
//! the report does not depend on the order inputs were given in.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{extract_predicted_boundary, extract_reference_boundary};
use crate::confusion::{ConfusionMatrix, EcrMode};
use crate::error::{Error, Result};
use crate::field::{score_directional, BdNormalization, GvfConfig, Stencil};
use crate::label::{CertaintyScheme, ClassMap, ExpertMap, Tiling};
use crate::matching::{aggregate, score, SegScores, Variant};
use crate::rational::{format_rational, percent, to_f64, Rational};

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub tiling: Tiling,
    pub scheme: CertaintyScheme,
    pub variants: Vec<Variant>,
    /// WDC normalization exponent.
    pub exponent: Rational,
    pub gvf: GvfConfig,
    pub bd_normalization: BdNormalization,
    pub ecr_mode: EcrMode,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            tiling: Tiling::non_overlapping(32).expect("valid tiling"),
            scheme: CertaintyScheme::default(),
            variants: vec![Variant::Plain, Variant::Nef, Variant::Gvf],
            exponent: Rational::new(1, 6),
            gvf: GvfConfig::default(),
            bd_normalization: BdNormalization::Field,
            ecr_mode: EcrMode::ModeledOnly,
            workers: None,
        }
    }
}

/// One classified image and the files of the experts who annotated it.
#[derive(Clone, Debug)]
pub struct ImageInput {
    pub pred: PathBuf,
    pub experts: Vec<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct EvalRun {
    pub images: Vec<ImageInput>,
    pub options: EvalOptions,
}

/// In-memory counterpart of [`ImageInput`].
#[derive(Clone, Debug)]
pub struct LoadedImage {
    pub name: String,
    pub pred: ClassMap,
    pub experts: Vec<(String, ExpertMap)>,
}

fn with_path<T>(path: &Path, result: Result<T>) -> Result<T> {
    result.map_err(|source| Error::InFile {
        path: path.to_path_buf(),
        source: Box::new(source),
    })
}

pub fn load_expert(path: &Path) -> Result<ExpertMap> {
    let file = with_path(path, File::open(path).map_err(Error::from))?;
    with_path(path, ExpertMap::parse(BufReader::new(file)))
}

pub fn load_class_map(path: &Path) -> Result<ClassMap> {
    let file = with_path(path, File::open(path).map_err(Error::from))?;
    with_path(path, ClassMap::parse(BufReader::new(file)))
}

/// Loads every file of the run (failing on the first unreadable one) and
/// evaluates it.
pub fn run_eval(run: &EvalRun) -> Result<Report> {
    if run.images.is_empty() {
        return Err(Error::Aggregate("no images"));
    }
    let mut loaded = Vec::with_capacity(run.images.len());
    for image in &run.images {
        if image.experts.is_empty() {
            return Err(Error::InFile {
                path: image.pred.clone(),
                source: Box::new(Error::Aggregate("no expert reference for this image")),
            });
        }
        let pred = load_class_map(&image.pred)?;
        let experts = image
            .experts
            .iter()
            .map(|p| Ok((p.display().to_string(), load_expert(p)?)))
            .collect::<Result<Vec<_>>>()?;
        loaded.push(LoadedImage {
            name: image.pred.display().to_string(),
            pred,
            experts,
        });
    }
    evaluate(&loaded, &run.options)
}

struct PairResult {
    matrix: ConfusionMatrix,
    entry: ImageEntry,
    scores: Vec<SegScores>,
}

fn evaluate_pair(
    name: &str,
    pred: &ClassMap,
    expert_name: &str,
    expert: &ExpertMap,
    options: &EvalOptions,
) -> Result<PairResult> {
    let in_pair = |e: Error| Error::InFile {
        path: PathBuf::from(expert_name),
        source: Box::new(e),
    };
    let mut matrix = ConfusionMatrix::new(pred.num_classes());
    matrix
        .accumulate_image(expert, pred, &options.tiling, &options.scheme)
        .map_err(in_pair)?;
    let found = extract_predicted_boundary(pred);
    let reference = extract_reference_boundary(expert, &options.scheme);
    let a = to_f64(&options.exponent);
    let scores = options
        .variants
        .iter()
        .map(|&variant| match variant {
            Variant::Gvf => score_directional(&found, &reference, a, options.gvf, options.bd_normalization),
            other => score(&found, &reference, other, a),
        })
        .collect::<Result<Vec<_>>>()
        .map_err(in_pair)?;
    Ok(PairResult {
        matrix,
        entry: ImageEntry {
            pred: name.to_string(),
            expert: expert_name.to_string(),
            width: pred.width(),
            height: pred.height(),
            scores: scores.iter().map(ScoreEntry::from).collect(),
        },
        scores,
    })
}

/// Evaluates already-parsed maps.
pub fn evaluate(images: &[LoadedImage], options: &EvalOptions) -> Result<Report> {
    let mut pairs: Vec<(&str, &ClassMap, &str, &ExpertMap)> = images
        .iter()
        .flat_map(|img| {
            img.experts
                .iter()
                .map(move |(en, e)| (img.name.as_str(), &img.pred, en.as_str(), e))
        })
        .collect();
    if pairs.is_empty() {
        return Err(Error::Aggregate("no (image, expert) pairs"));
    }
    pairs.sort_by(|a, b| (a.0, a.2).cmp(&(b.0, b.2)));
    let classes = pairs[0].1.num_classes();
    if let Some(p) = pairs.iter().find(|p| p.1.num_classes() != classes) {
        return Err(Error::ClassCountMismatch(classes, p.1.num_classes()));
    }

    let compute = || {
        pairs
            .par_iter()
            .map(|&(n, p, en, e)| evaluate_pair(n, p, en, e, options))
            .collect::<Result<Vec<_>>>()
    };
    let results = match options.workers {
        Some(workers) => rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|_| Error::Aggregate("cannot build worker pool"))?
            .install(compute)?,
        None => compute()?,
    };

    let matrix = ConfusionMatrix::merge(results.iter().map(|r| &r.matrix))?;
    let confusion = ConfusionReport::new(&matrix, options.ecr_mode)?;
    let aggregate = options
        .variants
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let per_variant: Vec<SegScores> = results.iter().map(|r| r.scores[k]).collect();
            aggregate(&per_variant).map(|s| ScoreEntry::from(&s))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Report {
        meta: Meta::new(options, images.len(), pairs.len()),
        confusion,
        segmentation: SegmentationReport {
            per_image: results.into_iter().map(|r| r.entry).collect(),
            aggregate,
        },
        matrix,
    })
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Report {
    pub meta: Meta,
    pub confusion: ConfusionReport,
    pub segmentation: SegmentationReport,
    /// Merged, un-normalized matrix.
    #[serde(skip)]
    pub matrix: ConfusionMatrix,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub scheme: String,
    pub tiling: TilingMeta,
    pub variants: Vec<Variant>,
    pub a: String,
    pub gvf: GvfMeta,
    pub bd_normalization: &'static str,
    pub ecr_mode: &'static str,
    pub images: usize,
    pub pairs: usize,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct TilingMeta {
    pub size: usize,
    pub step: usize,
    pub offset: [usize; 2],
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct GvfMeta {
    pub mu: f64,
    pub dt: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub stencil: &'static str,
}

impl Meta {
    fn new(options: &EvalOptions, images: usize, pairs: usize) -> Self {
        let t = options.tiling;
        Meta {
            tool: "certeval",
            version: env!("CARGO_PKG_VERSION"),
            scheme: options.scheme.to_spec_string(),
            tiling: TilingMeta {
                size: t.size(),
                step: t.step(),
                offset: [t.offset().0, t.offset().1],
            },
            variants: options.variants.clone(),
            a: format_rational(&options.exponent),
            gvf: GvfMeta {
                mu: options.gvf.mu,
                dt: options.gvf.dt,
                max_iterations: options.gvf.max_iterations,
                tolerance: options.gvf.tolerance,
                stencil: match options.gvf.stencil {
                    Stencil::Forward => "forward",
                    Stencil::Central => "central",
                },
            },
            bd_normalization: match options.bd_normalization {
                BdNormalization::Field => "field",
                BdNormalization::Gradient => "gradient",
            },
            ecr_mode: match options.ecr_mode {
                EcrMode::ModeledOnly => "modeled-only",
                EcrMode::AllRows => "all-rows",
            },
            images,
            pairs,
        }
    }
}

/// Exact rational with its floating-point value.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Exact {
    pub exact: String,
    pub value: f64,
}

impl From<&Rational> for Exact {
    fn from(r: &Rational) -> Self {
        Exact {
            exact: format_rational(r),
            value: to_f64(r),
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Flags {
    pub not_evaluated_rows: Vec<String>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ConfusionReport {
    pub classes: usize,
    /// Row labels: modeled class ids, then `unmodeled`.
    pub rows: Vec<String>,
    pub cm: Vec<Vec<Exact>>,
    #[serde(rename = "Ncm")]
    pub ncm: Vec<Vec<Exact>>,
    pub row_totals: Vec<Exact>,
    pub gcr: Vec<f64>,
    pub gcr_pct: Vec<f64>,
    pub ecr: Vec<f64>,
    pub ecr_pct: Vec<f64>,
    pub flags: Flags,
}

impl ConfusionReport {
    pub fn new(matrix: &ConfusionMatrix, ecr_mode: EcrMode) -> Result<Self> {
        let n = matrix.classes();
        let labels: Vec<String> = (1..=n)
            .map(|c| c.to_string())
            .chain(std::iter::once("unmodeled".to_string()))
            .collect();
        let normalized = matrix.normalize();
        let mut ncm: Vec<Vec<Exact>> = normalized
            .rows()
            .iter()
            .map(|row| row.iter().map(Exact::from).collect())
            .collect();
        let mut not_evaluated: Vec<String> = normalized
            .not_evaluated_rows()
            .into_iter()
            .map(|i| labels[i].clone())
            .collect();
        if !normalized.has_unmodeled_row() {
            ncm.push(vec![Exact::from(&Rational::from_integer(0)); n]);
            not_evaluated.push("unmodeled".to_string());
        }
        let floats = |v: Vec<Rational>| v.iter().map(to_f64).collect::<Vec<_>>();
        let gcr = floats(normalized.gcr());
        let ecr = floats(normalized.ecr(ecr_mode)?);
        Ok(ConfusionReport {
            classes: n,
            rows: labels,
            cm: matrix
                .rows()
                .map(|row| row.iter().map(Exact::from).collect())
                .collect(),
            ncm,
            row_totals: matrix.row_totals().iter().map(Exact::from).collect(),
            gcr_pct: gcr.iter().map(|&x| percent(x)).collect(),
            gcr,
            ecr_pct: ecr.iter().map(|&x| percent(x)).collect(),
            ecr,
            flags: Flags {
                not_evaluated_rows: not_evaluated,
            },
        })
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ScoreEntry {
    pub variant: Variant,
    pub wdc_raw: f64,
    pub wdc_pct: f64,
    pub fd_raw: f64,
    pub fd_pct: f64,
    pub pixels: usize,
}

impl From<&SegScores> for ScoreEntry {
    fn from(s: &SegScores) -> Self {
        ScoreEntry {
            variant: s.variant,
            wdc_raw: s.wdc,
            wdc_pct: s.wdc_pct(),
            fd_raw: s.fd,
            fd_pct: s.fd_pct(),
            pixels: s.pixels,
        }
    }
}

impl ScoreEntry {
    pub fn to_scores(&self) -> SegScores {
        SegScores {
            variant: self.variant,
            wdc: self.wdc_raw,
            fd: self.fd_raw,
            pixels: self.pixels,
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ImageEntry {
    pub pred: String,
    pub expert: String,
    pub width: usize,
    pub height: usize,
    pub scores: Vec<ScoreEntry>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SegmentationReport {
    pub per_image: Vec<ImageEntry>,
    pub aggregate: Vec<ScoreEntry>,
}
