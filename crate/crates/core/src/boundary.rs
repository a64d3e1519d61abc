//! Boundary pixel sets derived from classifications and from expert marks.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::label::{CertaintyScheme, ClassMap, ExpertMap};
use crate::rational::to_f64;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct BoundaryPixel {
    pub row: usize,
    pub col: usize,
    pub weight: f64,
}

/// Sparse set of weighted boundary pixels, kept in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMap {
    width: usize,
    height: usize,
    pixels: Vec<BoundaryPixel>,
}

impl BoundaryMap {
    pub fn empty(width: usize, height: usize) -> Self {
        BoundaryMap {
            width,
            height,
            pixels: Vec::new(),
        }
    }

    /// Validates coordinates, weights in (0, 1] and uniqueness; any input
    /// order is accepted.
    pub fn from_pixels(width: usize, height: usize, mut pixels: Vec<BoundaryPixel>) -> Result<Self> {
        for p in &pixels {
            if p.row >= height || p.col >= width {
                return Err(Error::InvalidBoundary {
                    row: p.row,
                    col: p.col,
                    reason: "outside the image",
                });
            }
            if !(p.weight > 0.0 && p.weight <= 1.0) {
                return Err(Error::InvalidBoundary {
                    row: p.row,
                    col: p.col,
                    reason: "weight outside (0, 1]",
                });
            }
        }
        pixels.sort_by_key(|p| (p.row, p.col));
        if let Some(w) = pixels.windows(2).find(|w| (w[0].row, w[0].col) == (w[1].row, w[1].col)) {
            return Err(Error::InvalidBoundary {
                row: w[0].row,
                col: w[0].col,
                reason: "duplicate coordinate",
            });
        }
        Ok(BoundaryMap {
            width,
            height,
            pixels,
        })
    }

    /// Unit-weight boundary at the given coordinates.
    pub fn from_coords(
        width: usize,
        height: usize,
        coords: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let pixels = coords
            .into_iter()
            .map(|(row, col)| BoundaryPixel { row, col, weight: 1.0 })
            .collect();
        BoundaryMap::from_pixels(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[BoundaryPixel] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pixels.iter().map(|p| (p.row, p.col))
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.pixels
            .binary_search_by_key(&(row, col), |p| (p.row, p.col))
            .is_ok()
    }

    pub fn total_weight(&self) -> f64 {
        self.pixels.iter().map(|p| p.weight).sum()
    }

    /// Debug dump as a UCM1-style grid: `0` off the boundary, the weight as
    /// a decimal token on it.
    pub fn to_debug_grid(&self) -> String {
        let mut cells = vec![None; self.width * self.height];
        for p in &self.pixels {
            cells[p.row * self.width + p.col] = Some(p.weight);
        }
        let mut out = format!("UCM1 {} {} 1\n", self.width, self.height);
        for row in cells.chunks(self.width) {
            let tokens: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Some(w) => format!("{w}"),
                    None => "0".to_string(),
                })
                .collect();
            let _ = writeln!(out, "{}", tokens.join(" "));
        }
        out
    }
}

/// Boundary implied by a classification: every unmasked pixel whose right or
/// bottom neighbour is unmasked and carries another class. Weights are 1.
pub fn extract_predicted_boundary(pred: &ClassMap) -> BoundaryMap {
    let (w, h) = (pred.width(), pred.height());
    let mut pixels = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let Some(here) = pred.get(r, c) else {
                continue;
            };
            let differs = |nr: usize, nc: usize| pred.get(nr, nc).is_some_and(|n| n != here);
            if (c + 1 < w && differs(r, c + 1)) || (r + 1 < h && differs(r + 1, c)) {
                pixels.push(BoundaryPixel {
                    row: r,
                    col: c,
                    weight: 1.0,
                });
            }
        }
    }
    BoundaryMap {
        width: w,
        height: h,
        pixels,
    }
}

/// Boundary marked by an expert, each pixel weighted by its boundary grade.
pub fn extract_reference_boundary(expert: &ExpertMap, scheme: &CertaintyScheme) -> BoundaryMap {
    let w = expert.width();
    let pixels = expert
        .pixels()
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            p.boundary.map(|g| BoundaryPixel {
                row: i / w,
                col: i % w,
                weight: to_f64(&scheme.weight(g)),
            })
        })
        .collect();
    BoundaryMap {
        width: w,
        height: expert.height(),
        pixels,
    }
}

/// Dense image: zero off the boundary, the pixel weight on it.
pub fn boundary_image(bmap: &BoundaryMap) -> Grid {
    let mut grid = Grid::zeros(bmap.width, bmap.height);
    for p in &bmap.pixels {
        grid.set(p.row, p.col, p.weight);
    }
    grid
}

/// Inverse of [`boundary_image`]: nonzero cells become boundary pixels.
pub fn boundary_from_image(grid: &Grid) -> Result<BoundaryMap> {
    let mut pixels = Vec::new();
    for r in 0..grid.height() {
        for c in 0..grid.width() {
            let v = grid.get(r, c);
            if v != 0.0 {
                pixels.push(BoundaryPixel { row: r, col: c, weight: v });
            }
        }
    }
    BoundaryMap::from_pixels(grid.width(), grid.height(), pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::{ExpertPixel, Grade};

    /// The 8x8 two-class map made of 4x4 tiles in a checkerboard pattern.
    fn checkerboard() -> ClassMap {
        ClassMap::from_fn(8, 8, 2, |r, c| Some(if (r < 4) == (c < 4) { 1 } else { 2 })).unwrap()
    }

    #[test]
    fn checkerboard_pattern() {
        let marked = [
            "...x....", "...x....", "...x....", "xxxxxxxx", "...x....", "...x....", "...x....",
            "...x....",
        ];
        let expected: Vec<(usize, usize)> = marked
            .iter()
            .enumerate()
            .flat_map(|(r, line)| {
                line.chars()
                    .enumerate()
                    .filter(|(_, ch)| *ch == 'x')
                    .map(move |(c, _)| (r, c))
            })
            .collect();
        let found = extract_predicted_boundary(&checkerboard());
        assert_eq!(found.coords().collect::<Vec<_>>(), expected);
        assert!(found.pixels().iter().all(|p| p.weight == 1.0));
    }

    #[test]
    fn uniform_map_has_no_boundary() {
        let map = ClassMap::from_fn(5, 4, 3, |_, _| Some(2)).unwrap();
        assert!(extract_predicted_boundary(&map).is_empty());
    }

    #[test]
    fn two_pixel_row_marks_left_pixel() {
        let map = ClassMap::new(2, 1, 2, vec![Some(1), Some(2)]).unwrap();
        let b = extract_predicted_boundary(&map);
        assert_eq!(b.coords().collect::<Vec<_>>(), vec![(0, 0)]);
    }

    #[test]
    fn masks_never_create_boundaries() {
        let map = ClassMap::new(3, 1, 2, vec![Some(1), None, Some(2)]).unwrap();
        assert!(extract_predicted_boundary(&map).is_empty());
        let map = ClassMap::new(2, 2, 2, vec![None, Some(1), Some(1), Some(2)]).unwrap();
        assert_eq!(
            extract_predicted_boundary(&map).coords().collect::<Vec<_>>(),
            vec![(0, 1), (1, 0)]
        );
    }

    #[test]
    fn reference_weights_follow_boundary_grades() {
        let scheme = CertaintyScheme::default();
        let expert = ExpertMap::new(
            3,
            1,
            1,
            vec![
                ExpertPixel::new(1, Grade::NotSure).with_boundary(Grade::Sure),
                ExpertPixel::new(1, Grade::Sure).with_boundary(Grade::ModeratelySure),
                ExpertPixel::new(1, Grade::Sure).with_boundary(Grade::NotSure),
            ],
        )
        .unwrap();
        let b = extract_reference_boundary(&expert, &scheme);
        let weights: Vec<f64> = b.pixels().iter().map(|p| p.weight).collect();
        assert_eq!(weights, vec![2.0 / 3.0, 0.5, 1.0 / 3.0]);

        let plain = ExpertMap::from_fn(3, 3, 1, |_, _| ExpertPixel::new(1, Grade::Sure)).unwrap();
        assert!(extract_reference_boundary(&plain, &scheme).is_empty());
    }

    #[test]
    fn dense_image() {
        assert!(boundary_image(&BoundaryMap::empty(3, 3)).data().iter().all(|&v| v == 0.0));
        let b = BoundaryMap::from_pixels(3, 3, vec![BoundaryPixel { row: 1, col: 1, weight: 0.5 }])
            .unwrap();
        let img = boundary_image(&b);
        assert_eq!(img.get(1, 1), 0.5);
        assert_eq!(img.data().iter().filter(|&&v| v != 0.0).count(), 1);

        let table = boundary_image(&extract_predicted_boundary(&checkerboard()));
        for r in 0..8 {
            for c in 0..8 {
                let on = r == 3 || c == 3;
                assert_eq!(table.get(r, c), if on { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn validation() {
        let px = |row, col, weight| BoundaryPixel { row, col, weight };
        assert!(BoundaryMap::from_pixels(2, 2, vec![px(2, 0, 1.0)]).is_err());
        assert!(BoundaryMap::from_pixels(2, 2, vec![px(0, 0, 0.0)]).is_err());
        assert!(BoundaryMap::from_pixels(2, 2, vec![px(0, 0, 1.0), px(0, 0, 0.5)]).is_err());
        let b = BoundaryMap::from_pixels(2, 2, vec![px(1, 0, 1.0), px(0, 1, 0.5)]).unwrap();
        assert_eq!(b.coords().collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
        assert!(b.contains(1, 0) && !b.contains(1, 1));
    }

    #[test]
    fn debug_grid_dump() {
        let b = BoundaryMap::from_pixels(2, 1, vec![BoundaryPixel { row: 0, col: 1, weight: 0.5 }])
            .unwrap();
        assert_eq!(b.to_debug_grid(), "UCM1 2 1 1\n0 0.5\n");
    }
}
