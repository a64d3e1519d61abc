//! Synthetic (reference, prediction) pairs with controlled corruptions, for
//! characterizing the boundary measures.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boundary::extract_predicted_boundary;
use crate::error::{Error, Result};
use crate::label::{ClassMap, ExpertMap, ExpertPixel, Grade};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Geometry {
    /// Class 1 on the left half, class 2 on the right half.
    StraightEdge,
    /// Class 2 square covering the central half of each axis, class 1 around it.
    TwoRegion,
    /// Alternating square cells of the given side.
    Checkerboard { cell: usize },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Corruption {
    /// Prediction translated right by this many pixels.
    Shift(usize),
    /// Prediction with a horizontal edge where the reference has a vertical
    /// one (straight edge only).
    OrthogonalCross,
    /// Prediction equal to the reference plus this many isolated mislabelled
    /// pixels placed away from every reference boundary.
    Spurious(usize),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct SynthSpec {
    pub geometry: Geometry,
    pub size: usize,
    pub corruption: Corruption,
    pub seed: u64,
    /// Grade of every class label.
    pub grade: Grade,
    /// Grade of every boundary mark.
    pub boundary_grade: Grade,
}

impl SynthSpec {
    pub fn new(geometry: Geometry, size: usize, corruption: Corruption) -> Self {
        SynthSpec {
            geometry,
            size,
            corruption,
            seed: 0,
            grade: Grade::Sure,
            boundary_grade: Grade::Sure,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthPair {
    pub expert: ExpertMap,
    pub pred: ClassMap,
}

fn class_at(geometry: Geometry, size: usize, r: usize, c: usize) -> u16 {
    match geometry {
        Geometry::StraightEdge => 1 + (c >= size / 2) as u16,
        Geometry::TwoRegion => {
            let inside = |x: usize| x >= size / 4 && x < size - size / 4;
            1 + (inside(r) && inside(c)) as u16
        }
        Geometry::Checkerboard { cell } => 1 + ((r / cell + c / cell) % 2) as u16,
    }
}

fn validate(spec: &SynthSpec) -> Result<()> {
    let bad = |m: String| Err(Error::InvalidGeometry(m));
    if spec.size < 4 {
        return bad(format!("size {} below 4", spec.size));
    }
    match spec.geometry {
        Geometry::Checkerboard { cell } if cell == 0 || cell >= spec.size => {
            return bad(format!("checkerboard cell {cell} must be in 1..{}", spec.size));
        }
        Geometry::TwoRegion if spec.size < 8 => {
            return bad("two-region needs size >= 8".into());
        }
        _ => {}
    }
    match spec.corruption {
        Corruption::Shift(t) => {
            let limit = match spec.geometry {
                Geometry::StraightEdge => spec.size / 2,
                Geometry::TwoRegion => spec.size / 4,
                Geometry::Checkerboard { cell } => cell,
            };
            if t >= limit {
                return bad(format!("shift {t} must be below {limit}"));
            }
        }
        Corruption::OrthogonalCross if spec.geometry != Geometry::StraightEdge => {
            return bad("orthogonal-cross is defined for the straight edge only".into());
        }
        _ => {}
    }
    Ok(())
}

pub fn gen_synthetic(spec: &SynthSpec) -> Result<SynthPair> {
    validate(spec)?;
    let n = spec.size;
    let truth = |r: usize, c: usize| class_at(spec.geometry, n, r, c);
    let layout = ClassMap::from_fn(n, n, 2, |r, c| Some(truth(r, c)))?;
    let reference = extract_predicted_boundary(&layout);
    let expert = ExpertMap::from_fn(n, n, 2, |r, c| {
        let p = ExpertPixel::new(truth(r, c), spec.grade);
        if reference.contains(r, c) {
            p.with_boundary(spec.boundary_grade)
        } else {
            p
        }
    })?;

    let pred = match spec.corruption {
        Corruption::Shift(t) => ClassMap::from_fn(n, n, 2, |r, c| Some(truth(r, c.saturating_sub(t))))?,
        Corruption::OrthogonalCross => ClassMap::from_fn(n, n, 2, |r, c| Some(truth(c, r)))?,
        Corruption::Spurious(k) => {
            let spots = place_spurious(k, n, spec.seed, |r, c| {
                reference
                    .coords()
                    .all(|(er, ec)| er.abs_diff(r).max(ec.abs_diff(c)) >= 3)
            })?;
            ClassMap::from_fn(n, n, 2, |r, c| {
                let class = truth(r, c);
                Some(if spots.contains(&(r, c)) { 3 - class } else { class })
            })?
        }
    };
    Ok(SynthPair { expert, pred })
}

fn place_spurious(
    k: usize,
    n: usize,
    seed: u64,
    clear_of_reference: impl Fn(usize, usize) -> bool,
) -> Result<Vec<(usize, usize)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spots: Vec<(usize, usize)> = Vec::with_capacity(k);
    let mut attempts = 0usize;
    while spots.len() < k {
        attempts += 1;
        if attempts > 10_000 * (k + 1) {
            return Err(Error::InvalidGeometry(format!(
                "cannot place {k} isolated pixels in a {n}x{n} image"
            )));
        }
        let (r, c) = (rng.gen_range(1..n - 1), rng.gen_range(1..n - 1));
        let apart = spots
            .iter()
            .all(|&(sr, sc)| sr.abs_diff(r).max(sc.abs_diff(c)) >= 3);
        if apart && clear_of_reference(r, c) {
            spots.push((r, c));
        }
    }
    spots.sort_unstable();
    Ok(spots)
}

/// Writes `expert.uem` and `pred.ucm` into `dir`, creating it if needed.
pub fn write_pair(pair: &SynthPair, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let expert = dir.join("expert.uem");
    let pred = dir.join("pred.ucm");
    fs::write(&expert, pair.expert.to_uem())?;
    fs::write(&pred, pair.pred.to_ucm())?;
    Ok((expert, pred))
}
