//! Well-detection (WDC) and false-detection (FD) measures between a found
//! boundary and a reference boundary.
//!
//! Each found pixel `f` is linked to its nearest reference pixel `e`
//! (Euclidean distance between pixel centers, ties to the smallest row-major
//! index). The per-pixel criteria are
//!
//! ```text
//! DC_f  = exp(-(d_fe W_e)^2) W_e
//! FDC_f = 1 - DC_f / W_e
//! ```
//!
//! and `n_ef` counts how many found pixels share the same `e`.

use serde::Serialize;

use crate::boundary::BoundaryMap;
use crate::error::{Error, Result};

/// Default exponent of the WDC normalization.
pub const DEFAULT_EXPONENT: f64 = 1.0 / 6.0;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct FoundMatch {
    pub row: usize,
    pub col: usize,
    /// Index into the reference map's pixels.
    pub reference: usize,
    pub distance: f64,
    /// Certainty weight `W_e` of the matched reference pixel.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchTable {
    found: Vec<FoundMatch>,
    /// `n_ef` for every reference pixel.
    counts: Vec<usize>,
    reference_weight: f64,
}

impl MatchTable {
    pub fn found(&self) -> &[FoundMatch] {
        &self.found
    }

    /// `n_ef` per reference pixel, in the reference map's order.
    pub fn reference_counts(&self) -> &[usize] {
        &self.counts
    }

    /// `n_ef` of the reference pixel matched by the `i`-th found pixel.
    pub fn n_ef(&self, i: usize) -> usize {
        self.counts[self.found[i].reference]
    }

    /// `Σ_e W_e` over all reference pixels.
    pub fn reference_weight(&self) -> f64 {
        self.reference_weight
    }
}

/// Links every found pixel to its nearest reference pixel.
pub fn match_boundaries(found: &BoundaryMap, reference: &BoundaryMap) -> Result<MatchTable> {
    if found.is_empty() || reference.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    let index = RowIndex::new(reference);
    let refs = reference.pixels();
    let mut counts = vec![0usize; refs.len()];
    let found: Vec<FoundMatch> = found
        .pixels()
        .iter()
        .map(|f| {
            let (e, d2) = index.nearest(f.row, f.col);
            counts[e] += 1;
            FoundMatch {
                row: f.row,
                col: f.col,
                reference: e,
                distance: (d2 as f64).sqrt(),
                weight: refs[e].weight,
            }
        })
        .collect();
    Ok(MatchTable {
        found,
        counts,
        reference_weight: reference.total_weight(),
    })
}

/// Reference pixels grouped by row, for nearest-neighbour search that
/// widens row by row until no closer candidate can exist.
struct RowIndex {
    /// `starts[r]..starts[r + 1]` are the pixels of row `r`.
    starts: Vec<usize>,
    cols: Vec<usize>,
}

impl RowIndex {
    fn new(map: &BoundaryMap) -> Self {
        let mut starts = vec![0usize; map.height() + 1];
        for p in map.pixels() {
            starts[p.row + 1] += 1;
        }
        for r in 0..map.height() {
            starts[r + 1] += starts[r];
        }
        RowIndex {
            starts,
            cols: map.pixels().iter().map(|p| p.col).collect(),
        }
    }

    /// Returns (row-major index, squared distance) of the nearest pixel.
    fn nearest(&self, row: usize, col: usize) -> (usize, u64) {
        let height = self.starts.len() - 1;
        let mut best: Option<(u64, usize)> = None;
        let consider = |r: usize, dr: u64, best: &mut Option<(u64, usize)>| {
            let (lo, hi) = (self.starts[r], self.starts[r + 1]);
            if lo == hi {
                return;
            }
            let cols = &self.cols[lo..hi];
            let p = cols.partition_point(|&c| c < col);
            for i in [p.checked_sub(1), (p < cols.len()).then_some(p)].into_iter().flatten() {
                let dc = cols[i].abs_diff(col) as u64;
                let cand = (dr * dr + dc * dc, lo + i);
                if best.is_none_or(|b| cand < b) {
                    *best = Some(cand);
                }
            }
        };
        for dr in 0..height.max(1) {
            let dr2 = (dr * dr) as u64;
            if best.is_some_and(|(d2, _)| dr2 > d2) {
                break;
            }
            if row >= dr {
                consider(row - dr, dr as u64, &mut best);
            }
            if dr > 0 && row + dr < height {
                consider(row + dr, dr as u64, &mut best);
            }
        }
        let (d2, e) = best.expect("reference set is non-empty");
        (e, d2)
    }
}

/// Well-detection criterion `exp(-(d W)^2) W`.
pub fn dc(distance: f64, weight: f64) -> f64 {
    (-(distance * weight).powi(2)).exp() * weight
}

/// False-detection criterion `1 - exp(-(d W)^2)`.
pub fn fdc(distance: f64, weight: f64) -> f64 {
    -(-(distance * weight).powi(2)).exp_m1()
}

/// `Σ x / (max x · Σ_e W_e)^a`, or 0 when every term vanishes.
fn normalized_sum(terms: impl Iterator<Item = f64> + Clone, reference_weight: f64, a: f64) -> f64 {
    let max = terms.clone().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    terms.sum::<f64>() / (max * reference_weight).powf(a)
}

/// `1 - exp(-Σ x / (max x · Σ_e W_e))`, or 0 when every term vanishes.
fn exponential_ratio(terms: impl Iterator<Item = f64> + Clone, reference_weight: f64) -> f64 {
    let max = terms.clone().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    -(-terms.sum::<f64>() / (max * reference_weight)).exp_m1()
}

/// WDC without the `n_ef` correction.
pub fn wdc(table: &MatchTable, a: f64) -> f64 {
    normalized_sum(
        table.found.iter().map(|m| dc(m.distance, m.weight)),
        table.reference_weight,
        a,
    )
}

/// WDC with each criterion divided by its `n_ef`.
pub fn wdc_nef(table: &MatchTable, a: f64) -> f64 {
    wdc_scaled(table, a, |_| 1.0)
}

/// `n_ef`-corrected WDC with `DC_f` multiplied by `scale(i)` for the `i`-th
/// found pixel.
pub fn wdc_scaled(table: &MatchTable, a: f64, scale: impl Fn(usize) -> f64 + Clone) -> f64 {
    let terms = (0..table.found.len()).map(move |i| {
        let m = &table.found[i];
        dc(m.distance, m.weight) * scale(i) / table.n_ef(i) as f64
    });
    normalized_sum(terms, table.reference_weight, a)
}

/// Normalized false-detection measure.
pub fn fd(table: &MatchTable) -> f64 {
    fd_scaled(table, |_| 1.0)
}

/// FD with `FDC_f` multiplied by `scale(i)` for the `i`-th found pixel.
pub fn fd_scaled(table: &MatchTable, scale: impl Fn(usize) -> f64 + Clone) -> f64 {
    let terms = (0..table.found.len()).map(move |i| {
        let m = &table.found[i];
        fdc(m.distance, m.weight) * scale(i) * table.n_ef(i) as f64
    });
    exponential_ratio(terms, table.reference_weight)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Distance only.
    Plain,
    /// Distance with the `n_ef` many-to-one correction.
    Nef,
    /// `n_ef` correction plus direction agreement from GVF fields.
    Gvf,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::Nef => "nef",
            Variant::Gvf => "gvf",
        }
    }

    pub fn parse(text: &str) -> Option<Variant> {
        match text {
            "plain" => Some(Variant::Plain),
            "nef" => Some(Variant::Nef),
            "gvf" => Some(Variant::Gvf),
            _ => None,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct SegScores {
    pub variant: Variant,
    /// Raw WDC; may exceed 1.
    pub wdc: f64,
    pub fd: f64,
    /// Image size in pixels, the aggregation weight.
    pub pixels: usize,
}

impl SegScores {
    pub fn wdc_pct(&self) -> f64 {
        crate::rational::percent(self.wdc.min(1.0))
    }

    pub fn fd_pct(&self) -> f64 {
        crate::rational::percent(self.fd)
    }
}

/// Scores for the cases where one of the sets is empty, `None` otherwise.
pub(crate) fn empty_convention(found: &BoundaryMap, reference: &BoundaryMap) -> Option<(f64, f64)> {
    match (found.is_empty(), reference.is_empty()) {
        (true, true) => Some((1.0, 0.0)),
        (true, false) => Some((0.0, 0.0)),
        (false, true) => Some((0.0, 1.0)),
        (false, false) => None,
    }
}

/// Plain or `n_ef` scores of one found boundary against one reference.
pub fn score(found: &BoundaryMap, reference: &BoundaryMap, variant: Variant, a: f64) -> Result<SegScores> {
    let pixels = found.width() * found.height();
    let (wdc_value, fd_value) = match empty_convention(found, reference) {
        Some(v) => v,
        None => {
            let table = match_boundaries(found, reference)?;
            match variant {
                Variant::Plain => (wdc(&table, a), fd(&table)),
                Variant::Nef => (wdc_nef(&table, a), fd(&table)),
                Variant::Gvf => {
                    return Err(Error::Aggregate("direction-weighted scores need GVF fields"))
                }
            }
        }
    };
    Ok(SegScores {
        variant,
        wdc: wdc_value,
        fd: fd_value,
        pixels,
    })
}

/// Size-weighted mean of per-image scores of a single variant.
pub fn aggregate(scores: &[SegScores]) -> Result<SegScores> {
    let first = scores.first().ok_or(Error::Aggregate("no scores"))?;
    if scores.iter().any(|s| s.variant != first.variant) {
        return Err(Error::Aggregate("mixed variants"));
    }
    let total: usize = scores.iter().map(|s| s.pixels).sum();
    if total == 0 {
        return Err(Error::Aggregate("zero total size"));
    }
    let mean = |f: fn(&SegScores) -> f64| {
        scores.iter().map(|s| f(s) * s.pixels as f64).sum::<f64>() / total as f64
    };
    Ok(SegScores {
        variant: first.variant,
        wdc: mean(|s| s.wdc),
        fd: mean(|s| s.fd),
        pixels: total,
    })
}
