#![allow(dead_code)]

use certeval_core::{BoundaryMap, BoundaryPixel, Grid};
use rand::Rng;

/// Nearest reference index by exhaustive search: minimum of
/// (squared distance, row-major index).
pub fn brute_nearest(found: (usize, usize), reference: &BoundaryMap) -> (usize, u64) {
    reference
        .pixels()
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let dr = e.row.abs_diff(found.0) as u64;
            let dc = e.col.abs_diff(found.1) as u64;
            (dr * dr + dc * dc, i)
        })
        .min()
        .map(|(d2, i)| (i, d2))
        .expect("non-empty reference")
}

/// Random boundary of roughly `density` coverage, never empty.
pub fn random_boundary(rng: &mut impl Rng, width: usize, height: usize, density: f64) -> BoundaryMap {
    let weights = [1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0];
    let mut pixels = Vec::new();
    for r in 0..height {
        for c in 0..width {
            if rng.gen_bool(density) {
                pixels.push(BoundaryPixel {
                    row: r,
                    col: c,
                    weight: weights[rng.gen_range(0..weights.len())],
                });
            }
        }
    }
    if pixels.is_empty() {
        pixels.push(BoundaryPixel {
            row: rng.gen_range(0..height),
            col: rng.gen_range(0..width),
            weight: 1.0,
        });
    }
    BoundaryMap::from_pixels(width, height, pixels).unwrap()
}

pub fn random_boundary_image(rng: &mut impl Rng, n: usize) -> Grid {
    let weights = [1.0 / 3.0, 0.5, 2.0 / 3.0, 1.0];
    Grid::from_fn(n, n, |_, _| {
        if rng.gen_bool(0.25) {
            weights[rng.gen_range(0..weights.len())]
        } else {
            0.0
        }
    })
}
