//! Evaluation of image classification and segmentation results against
//! reference annotations from several experts who label each pixel with a
//! graded certainty.
//!
//! The crate covers two complementary views of the same output:
//!
//! * [`confusion`]: a certainty-weighted confusion matrix accumulated over
//!   (possibly inhomogeneous) tiles, with good- and error-classification rate
//!   vectors.
//! * [`matching`] and [`field`]: boundary well-detection (WDC) and
//!   false-detection (FD) measures between the boundary implied by a
//!   classification and the expert boundary, optionally weighted by the
//!   agreement of boundary directions computed from Gradient Vector Flow.
//!
//! [`eval`], [`synth`] and [`convert`] provide the orchestration used by the
//! `certeval` command-line tool.

pub mod boundary;
pub mod confusion;
pub mod convert;
pub mod error;
pub mod eval;
pub mod field;
pub mod label;
pub mod matching;
pub mod rational;
pub mod synth;

pub use boundary::{BoundaryMap, BoundaryPixel};
pub use confusion::{ConfusionMatrix, EcrMode, NormalizedConfusion};
pub use error::{Error, Result};
pub use field::{GvfConfig, Grid, Stencil, VectorField};
pub use label::{CertaintyScheme, ClassMap, ExpertMap, ExpertPixel, Grade, Tile, Tiling};
pub use matching::{MatchTable, SegScores, Variant};
pub use rational::Rational;
