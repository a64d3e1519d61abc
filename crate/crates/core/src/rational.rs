//! Exact rational arithmetic used for weights and confusion-matrix entries.

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

/// Exact rational number. Denominators stay bounded by the least common
/// multiple of the scheme's weight denominators times the tile area.
pub type Rational = Ratio<i128>;

/// Parses `p/q` or a bare integer `p`.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let text = text.trim();
    let (numer, denom) = match text.split_once('/') {
        Some((p, q)) => (p.trim().parse::<i128>().ok()?, q.trim().parse::<i128>().ok()?),
        None => (text.parse::<i128>().ok()?, 1),
    };
    if denom == 0 {
        return None;
    }
    Some(Rational::new(numer, denom))
}

/// Formats as a reduced `p/q` string (integers keep the `/1`).
pub fn format_rational(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

pub fn to_f64(value: &Rational) -> f64 {
    if value.is_zero() {
        return 0.0;
    }
    value.to_f64().unwrap_or_else(|| {
        value.numer().to_f64().unwrap_or(f64::NAN) / value.denom().to_f64().unwrap_or(f64::NAN)
    })
}

/// `value * 100`, rounded to two decimals.
pub fn percent(value: f64) -> f64 {
    (value * 10_000.0).round() / 100.0
}
