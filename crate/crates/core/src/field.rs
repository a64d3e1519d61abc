//! Gradient and Gradient Vector Flow fields over boundary images, and the
//! direction-agreement measure BD built from them.
//!
//! Coordinates follow image convention: `x` runs along columns and `y` along
//! rows, so `u = ∂I/∂x` and `v = ∂I/∂y`.
//!
//! The GVF field `f = (u, v)` minimizes
//!
//! ```text
//! E(f) = Σ μ (|D_x u|² + |D_y u|² + |D_x v|² + |D_y v|²) + |g|² |g - f|²
//! ```
//!
//! with forward differences `D` (zero across the image border). Each
//! iteration takes an explicit step on the smoothness term and solves the
//! data term exactly:
//!
//! ```text
//! f ← (f + dt (μ Δf + |g|² g)) / (1 + dt |g|²)
//! ```
//!
//! where `Δ` is the 5-point Laplacian with replicated borders. The energy is
//! non-increasing for `dt ≤ 1/(4μ)`.

use std::io::{self, Read, Write};

use rayon::prelude::*;

use crate::boundary::{boundary_image, BoundaryMap};
use crate::error::{Error, Result};
use crate::matching::{empty_convention, fd_scaled, match_boundaries, wdc_scaled, MatchTable, SegScores, Variant};

/// Dense row-major grid of reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Grid {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let data = (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        Grid { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Two-component field over an image grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    width: usize,
    height: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl VectorField {
    pub fn zeros(width: usize, height: usize) -> Self {
        VectorField {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    pub fn from_components(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != width * height || v.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                found: (u.len().min(v.len()), 1),
            });
        }
        Ok(VectorField { width, height, u, v })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn at(&self, row: usize, col: usize) -> (f64, f64) {
        let i = row * self.width + col;
        (self.u[i], self.v[i])
    }

    pub fn magnitude(&self, row: usize, col: usize) -> f64 {
        let (u, v) = self.at(row, col);
        u.hypot(v)
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    fn check_shape(&self, other: &VectorField) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                found: (other.width, other.height),
            });
        }
        Ok(())
    }

    /// Little-endian dump: `UVF1`, width u32, height u32, 4 reserved zero
    /// bytes, then the u plane and the v plane as f64 rows.
    pub fn write_uvf(&self, mut out: impl Write) -> io::Result<()> {
        out.write_all(b"UVF1")?;
        out.write_all(&(self.width as u32).to_le_bytes())?;
        out.write_all(&(self.height as u32).to_le_bytes())?;
        out.write_all(&[0u8; 4])?;
        for x in self.u.iter().chain(&self.v) {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_uvf(mut input: impl Read) -> Result<Self> {
        let mut header = [0u8; 16];
        input.read_exact(&mut header)?;
        if &header[..4] != b"UVF1" {
            return Err(Error::parse(1, "bad UVF1 magic"));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
        let (width, height) = (word(4), word(8));
        if header[12..] != [0; 4] {
            return Err(Error::parse(1, "nonzero UVF1 reserved bytes"));
        }
        let n = width
            .checked_mul(height)
            .filter(|n| *n <= usize::MAX / 16)
            .ok_or_else(|| Error::parse(1, "UVF1 dimensions too large"))?;
        let mut bytes = vec![0u8; 16 * n];
        input.read_exact(&mut bytes)?;
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let (u, v) = values.split_at(n);
        VectorField::from_components(width, height, u.to_vec(), v.to_vec())
    }
}

/// Finite-difference stencil used for image gradients.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum Stencil {
    /// `I(x+1) - I(x)`, backward on the last row/column. Non-zero on every
    /// pixel of a one-pixel-wide boundary line.
    #[default]
    Forward,
    /// `(I(x+1) - I(x-1)) / 2` inside, one-sided on the borders. Vanishes on
    /// the centerline of a symmetric ridge.
    Central,
}

fn derivative(values: impl Fn(usize) -> f64, i: usize, n: usize, stencil: Stencil) -> f64 {
    match stencil {
        Stencil::Forward if i + 1 < n => values(i + 1) - values(i),
        Stencil::Forward => values(i) - values(i - 1),
        Stencil::Central if i == 0 => values(1) - values(0),
        Stencil::Central if i + 1 == n => values(i) - values(i - 1),
        Stencil::Central => (values(i + 1) - values(i - 1)) / 2.0,
    }
}

pub fn gradient(image: &Grid, stencil: Stencil) -> Result<VectorField> {
    let (w, h) = (image.width, image.height);
    if w < 2 || h < 2 {
        return Err(Error::GridTooSmall { width: w, height: h });
    }
    let mut field = VectorField::zeros(w, h);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            field.u[i] = derivative(|k| image.get(r, k), c, w, stencil);
            field.v[i] = derivative(|k| image.get(k, c), r, h, stencil);
        }
    }
    Ok(field)
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct GvfConfig {
    /// Smoothness weight.
    pub mu: f64,
    pub dt: f64,
    pub max_iterations: usize,
    /// Stop once the largest per-pixel update falls below this.
    pub tolerance: f64,
    pub stencil: Stencil,
}

impl Default for GvfConfig {
    fn default() -> Self {
        GvfConfig {
            mu: 0.05,
            dt: 4.0,
            max_iterations: 500,
            tolerance: 1e-4,
            stencil: Stencil::Forward,
        }
    }
}

impl GvfConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGvfConfig(msg));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if self.dt.is_nan() || self.dt <= 0.0 {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.dt * 4.0 * self.mu > 1.0 {
            return bad(format!(
                "dt = {} exceeds the stability bound 1/(4 mu) = {}",
                self.dt,
                1.0 / (4.0 * self.mu)
            ));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        Ok(())
    }
}

/// Iterative GVF solver; exposes single steps so callers can observe the
/// descent.
pub struct GvfSolver {
    cfg: GvfConfig,
    gradient: VectorField,
    /// `|g|²` per pixel.
    data_weight: Vec<f64>,
    field: VectorField,
    scratch: VectorField,
    iterations: usize,
}

#[derive(Clone, Debug)]
pub struct GvfSolution {
    pub field: VectorField,
    pub gradient: VectorField,
    pub iterations: usize,
    pub converged: bool,
}

impl GvfSolver {
    pub fn new(image: &Grid, cfg: GvfConfig) -> Result<Self> {
        cfg.validate()?;
        let gradient = gradient(image, cfg.stencil)?;
        let data_weight = gradient
            .u
            .iter()
            .zip(&gradient.v)
            .map(|(u, v)| u * u + v * v)
            .collect();
        Ok(GvfSolver {
            cfg,
            field: gradient.clone(),
            scratch: gradient.clone(),
            gradient,
            data_weight,
            iterations: 0,
        })
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    pub fn gradient(&self) -> &VectorField {
        &self.gradient
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// One iteration; returns the largest absolute component update.
    pub fn step(&mut self) -> Result<f64> {
        let (w, h) = (self.field.width, self.field.height);
        let GvfConfig { mu, dt, .. } = self.cfg;
        let b = &self.data_weight;
        let g = &self.gradient;
        let mut max_update = 0.0f64;
        for (src, dst, target) in [
            (&self.field.u, &mut self.scratch.u, &g.u),
            (&self.field.v, &mut self.scratch.v, &g.v),
        ] {
            let update = dst
                .par_chunks_mut(w)
                .enumerate()
                .map(|(r, out)| {
                    let up = r.saturating_sub(1);
                    let down = (r + 1).min(h - 1);
                    let mut local = 0.0f64;
                    for c in 0..w {
                        let i = r * w + c;
                        let left = src[r * w + c.saturating_sub(1)];
                        let right = src[r * w + (c + 1).min(w - 1)];
                        let lap = src[up * w + c] + src[down * w + c] + left + right - 4.0 * src[i];
                        let next = (src[i] + dt * (mu * lap + b[i] * target[i])) / (1.0 + dt * b[i]);
                        local = local.max((next - src[i]).abs());
                        out[c] = next;
                    }
                    local
                })
                .reduce(|| 0.0, f64::max);
            max_update = max_update.max(update);
        }
        std::mem::swap(&mut self.field, &mut self.scratch);
        self.iterations += 1;
        if !max_update.is_finite() || !self.field.is_finite() {
            return Err(Error::GvfDiverged {
                iteration: self.iterations,
            });
        }
        Ok(max_update)
    }

    pub fn run(mut self) -> Result<GvfSolution> {
        let mut converged = false;
        while self.iterations < self.cfg.max_iterations {
            if self.step()? < self.cfg.tolerance {
                converged = true;
                break;
            }
        }
        Ok(GvfSolution {
            field: self.field,
            gradient: self.gradient,
            iterations: self.iterations,
            converged,
        })
    }
}

/// Solves the GVF of a boundary image, starting from its gradient.
pub fn gvf(image: &Grid, cfg: GvfConfig) -> Result<GvfSolution> {
    GvfSolver::new(image, cfg)?.run()
}

/// Discrete GVF energy of `field` for the data field `gradient`.
pub fn gvf_energy(field: &VectorField, gradient: &VectorField, mu: f64) -> Result<f64> {
    field.check_shape(gradient)?;
    let (w, h) = (field.width, field.height);
    let smooth = |a: &[f64]| {
        let mut s = 0.0;
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                if c + 1 < w {
                    s += (a[i + 1] - a[i]).powi(2);
                }
                if r + 1 < h {
                    s += (a[i + w] - a[i]).powi(2);
                }
            }
        }
        s
    };
    let data: f64 = (0..w * h)
        .map(|i| {
            let (gu, gv) = (gradient.u[i], gradient.v[i]);
            (gu * gu + gv * gv) * ((gu - field.u[i]).powi(2) + (gv - field.v[i]).powi(2))
        })
        .sum();
    Ok(mu * (smooth(&field.u) + smooth(&field.v)) + data)
}

/// Zero-magnitude guard for BD.
pub const BD_EPSILON: f64 = 1e-6;

/// `|a·b| / (|a| |b|)` per pixel, 0 where either magnitude is below `eps`.
pub fn bd(reference: &VectorField, found: &VectorField, eps: f64) -> Result<Grid> {
    bd_normalized_by(reference, found, reference, found, eps, true)
}

/// Literal variant that divides the GVF dot product by the plain gradient
/// magnitudes. Unbounded where the gradients are small.
pub fn bd_gradient_normalized(
    reference: &VectorField,
    found: &VectorField,
    reference_gradient: &VectorField,
    found_gradient: &VectorField,
    eps: f64,
) -> Result<Grid> {
    bd_normalized_by(reference, found, reference_gradient, found_gradient, eps, false)
}

fn bd_normalized_by(
    a: &VectorField,
    b: &VectorField,
    na: &VectorField,
    nb: &VectorField,
    eps: f64,
    clamp: bool,
) -> Result<Grid> {
    a.check_shape(b)?;
    a.check_shape(na)?;
    a.check_shape(nb)?;
    let data = (0..a.u.len())
        .map(|i| {
            let ma = na.u[i].hypot(na.v[i]);
            let mb = nb.u[i].hypot(nb.v[i]);
            if ma < eps || mb < eps {
                return 0.0;
            }
            let value = (a.u[i] * b.u[i] + a.v[i] * b.v[i]).abs() / (ma * mb);
            // Cauchy-Schwarz bounds the field-normalized value by 1 up to rounding.
            if clamp {
                value.min(1.0)
            } else {
                value
            }
        })
        .collect();
    Ok(Grid {
        width: a.width,
        height: a.height,
        data,
    })
}

/// `n_ef`-corrected WDC with `DC_f` weighted by BD at the found pixel.
pub fn wdc_directional(table: &MatchTable, bd_grid: &Grid, a: f64) -> f64 {
    wdc_scaled(table, a, |i| {
        let m = &table.found()[i];
        bd_grid.get(m.row, m.col)
    })
}

/// FD with `FDC_f` weighted by `1 - BD` at the found pixel.
pub fn fd_directional(table: &MatchTable, bd_grid: &Grid) -> f64 {
    fd_scaled(table, |i| {
        let m = &table.found()[i];
        1.0 - bd_grid.get(m.row, m.col)
    })
}

/// How BD is normalized.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum BdNormalization {
    /// By the GVF magnitudes; BD stays in [0, 1].
    #[default]
    Field,
    /// By the plain gradient magnitudes, as literally printed.
    Gradient,
}

/// BD grid between the GVF fields of two boundary maps.
pub fn direction_agreement(
    found: &BoundaryMap,
    reference: &BoundaryMap,
    cfg: GvfConfig,
    normalization: BdNormalization,
) -> Result<Grid> {
    let reference = gvf(&boundary_image(reference), cfg)?;
    let found = gvf(&boundary_image(found), cfg)?;
    match normalization {
        BdNormalization::Field => bd(&reference.field, &found.field, BD_EPSILON),
        BdNormalization::Gradient => bd_gradient_normalized(
            &reference.field,
            &found.field,
            &reference.gradient,
            &found.gradient,
            BD_EPSILON,
        ),
    }
}

/// Direction-weighted scores of one found boundary against one reference.
pub fn score_directional(
    found: &BoundaryMap,
    reference: &BoundaryMap,
    a: f64,
    cfg: GvfConfig,
    normalization: BdNormalization,
) -> Result<SegScores> {
    if (found.width(), found.height()) != (reference.width(), reference.height()) {
        return Err(Error::DimensionMismatch {
            expected: (reference.width(), reference.height()),
            found: (found.width(), found.height()),
        });
    }
    let pixels = found.width() * found.height();
    let (wdc, fd) = match empty_convention(found, reference) {
        Some(v) => v,
        None => {
            let grid = direction_agreement(found, reference, cfg, normalization)?;
            let table = match_boundaries(found, reference)?;
            (wdc_directional(&table, &grid, a), fd_directional(&table, &grid))
        }
    };
    Ok(SegScores {
        variant: Variant::Gvf,
        wdc,
        fd,
        pixels,
    })
}
