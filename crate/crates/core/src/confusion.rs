//! Certainty-weighted confusion matrices and the rates derived from them.
//!
//! A matrix has one row per modeled class plus a trailing row for unmodeled
//! reference content (class 0), and one column per modeled class. Entries are
//! exact rationals: inhomogeneous tiles and certainty weights contribute
//! fractional counts.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::label::{tile_composition, CertaintyScheme, ClassMap, ExpertMap, Tiling, UNMODELED};
use crate::rational::Rational;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    /// `(classes + 1) × classes`, row-major; row `classes` is unmodeled.
    cells: Vec<Rational>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            cells: vec![Rational::zero(); (classes + 1) * classes],
        }
    }

    /// Number of modeled classes.
    pub fn classes(&self) -> usize {
        self.classes
    }

    fn row_index(&self, class: u16) -> usize {
        if class == UNMODELED {
            self.classes
        } else {
            class as usize - 1
        }
    }

    /// Entry for reference class `truth` (0 = unmodeled) predicted as `predicted`.
    pub fn get(&self, truth: u16, predicted: u16) -> Rational {
        assert!(predicted >= 1 && predicted as usize <= self.classes);
        self.cells[self.row_index(truth) * self.classes + predicted as usize - 1]
    }

    /// Rows in presentation order: classes `1..=N`, then the unmodeled row.
    pub fn rows(&self) -> impl Iterator<Item = &[Rational]> {
        self.cells.chunks(self.classes)
    }

    pub fn unmodeled_row(&self) -> &[Rational] {
        &self.cells[self.classes * self.classes..]
    }

    pub fn row_totals(&self) -> Vec<Rational> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<Rational> {
        (0..self.classes)
            .map(|j| self.rows().map(|r| r[j]).sum())
            .collect()
    }

    /// Adds one tile's composition to the `predicted` column.
    pub fn accumulate_tile(&mut self, composition: &[(u16, Rational)], predicted: u16) -> Result<()> {
        if predicted == UNMODELED {
            return Err(Error::UnmodeledPrediction { row: 0, col: 0 });
        }
        if predicted as usize > self.classes {
            return Err(Error::ClassOutOfRange {
                class: predicted as usize,
                max: self.classes,
            });
        }
        for &(class, _) in composition {
            if class as usize > self.classes {
                return Err(Error::ClassOutOfRange {
                    class: class as usize,
                    max: self.classes,
                });
            }
        }
        let col = predicted as usize - 1;
        for &(class, mass) in composition {
            let idx = self.row_index(class) * self.classes + col;
            self.cells[idx] += mass;
        }
        Ok(())
    }

    /// Folds every tile of `tiling` over one (expert, prediction) pair. The
    /// tile's predicted class is read at its center pixel; tiles whose center
    /// is masked are skipped.
    pub fn accumulate_image(
        &mut self,
        expert: &ExpertMap,
        pred: &ClassMap,
        tiling: &Tiling,
        scheme: &CertaintyScheme,
    ) -> Result<()> {
        if (expert.width(), expert.height()) != (pred.width(), pred.height()) {
            return Err(Error::DimensionMismatch {
                expected: (expert.width(), expert.height()),
                found: (pred.width(), pred.height()),
            });
        }
        for map_classes in [expert.num_classes(), pred.num_classes()] {
            if map_classes != self.classes {
                return Err(Error::ClassCountMismatch(self.classes, map_classes));
            }
        }
        for tile in tiling.tiles(expert.width(), expert.height()) {
            let (r, c) = tile.center();
            let Some(predicted) = pred.get(r, c) else {
                continue;
            };
            if predicted == UNMODELED {
                return Err(Error::UnmodeledPrediction {
                    row: tile.row,
                    col: tile.col,
                });
            }
            let composition = tile_composition(expert, tile, scheme);
            self.accumulate_tile(&composition, predicted)?;
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::ClassCountMismatch(self.classes, other.classes));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
        Ok(())
    }

    /// Entrywise sum, e.g. of the matrices obtained from different experts.
    pub fn merge<'a>(matrices: impl IntoIterator<Item = &'a ConfusionMatrix>) -> Result<Self> {
        let mut iter = matrices.into_iter();
        let mut total = iter
            .next()
            .ok_or(Error::Aggregate("no confusion matrices to merge"))?
            .clone();
        for m in iter {
            total.add_assign(m)?;
        }
        Ok(total)
    }

    /// Row-normalizes the matrix. The unmodeled row is kept only when some
    /// unmodeled content was seen.
    pub fn normalize(&self) -> NormalizedConfusion {
        let mut rows = Vec::with_capacity(self.classes + 1);
        let mut totals = Vec::with_capacity(self.classes + 1);
        let mut evaluated = Vec::with_capacity(self.classes + 1);
        for (i, row) in self.rows().enumerate() {
            let total: Rational = row.iter().sum();
            if i == self.classes && total.is_zero() {
                break;
            }
            rows.push(if total.is_zero() {
                vec![Rational::zero(); self.classes]
            } else {
                row.iter().map(|x| x / total).collect()
            });
            totals.push(total);
            evaluated.push(!total.is_zero());
        }
        NormalizedConfusion {
            classes: self.classes,
            rows,
            row_totals: totals,
            evaluated,
        }
    }
}

/// How the error-classification rate treats the unmodeled row.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum EcrMode {
    /// Rates for modeled classes only; second-kind sums run over modeled rows
    /// and are divided by `N - 1`.
    #[default]
    ModeledOnly,
    /// Every row takes part: second-kind sums include the unmodeled row and
    /// are divided by `R - 1` where `R` counts all rows. The unmodeled row
    /// gets half its (first-kind only) leakage. This matches the tabulated
    /// four-entry sonar results.
    AllRows,
}

/// Row-normalized confusion matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalizedConfusion {
    classes: usize,
    rows: Vec<Vec<Rational>>,
    row_totals: Vec<Rational>,
    evaluated: Vec<bool>,
}

impl NormalizedConfusion {
    /// Builds from explicit rows: `classes` modeled rows, optionally followed by
    /// one unmodeled row. Totals are taken as the row sums.
    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let classes = rows.first().map(Vec::len).unwrap_or(0);
        if classes == 0 || !(rows.len() == classes || rows.len() == classes + 1) {
            return Err(Error::ClassCountMismatch(classes, rows.len()));
        }
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::ClassCountMismatch(classes, rows.len()));
        }
        let row_totals: Vec<Rational> = rows.iter().map(|r| r.iter().sum()).collect();
        let evaluated = row_totals.iter().map(|t| !t.is_zero()).collect();
        Ok(NormalizedConfusion {
            classes,
            rows,
            row_totals,
            evaluated,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn has_unmodeled_row(&self) -> bool {
        self.rows.len() > self.classes
    }

    /// `N_i`, the un-normalized row sums.
    pub fn row_totals(&self) -> &[Rational] {
        &self.row_totals
    }

    /// Rows with a zero total; their entries are all zero.
    pub fn not_evaluated_rows(&self) -> Vec<usize> {
        self.evaluated
            .iter()
            .enumerate()
            .filter(|(_, e)| !**e)
            .map(|(i, _)| i)
            .collect()
    }

    /// Good-classification rates: the diagonal, with 0 for the unmodeled row.
    pub fn gcr(&self) -> Vec<Rational> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| if i < self.classes { row[i] } else { Rational::zero() })
            .collect()
    }

    /// Error-classification rates: the mean of the first-kind error (row
    /// leakage) and the normalized second-kind error (column intrusion).
    pub fn ecr(&self, mode: EcrMode) -> Result<Vec<Rational>> {
        let n = self.classes;
        let (summed_rows, divisor) = match mode {
            EcrMode::ModeledOnly => (n, n),
            EcrMode::AllRows => (self.rows.len(), self.rows.len()),
        };
        if divisor < 2 {
            return Err(Error::TooFewClasses(divisor));
        }
        let divisor = Rational::from_integer(divisor as i128 - 1);
        let half = Rational::new(1, 2);
        let mut out: Vec<Rational> = (0..n)
            .map(|k| {
                let first: Rational = (0..n).filter(|&j| j != k).map(|j| self.rows[k][j]).sum();
                let second: Rational = (0..summed_rows)
                    .filter(|&i| i != k)
                    .map(|i| self.rows[i][k])
                    .sum();
                half * (first + second / divisor)
            })
            .collect();
        if mode == EcrMode::AllRows && self.has_unmodeled_row() {
            let leakage: Rational = self.rows[n].iter().sum();
            out.push(half * leakage);
        }
        Ok(out)
    }

    pub fn is_row_stochastic(&self) -> bool {
        self.rows
            .iter()
            .zip(&self.evaluated)
            .all(|(row, &e)| !e || row.iter().sum::<Rational>() == Rational::one())
    }
}
