//! Annotation and prediction maps, certainty grades, and tiles.
//!
//! Two line-oriented ASCII formats carry the maps on disk:
//!
//! ```text
//! UEM1 <width> <height> <num_classes>
//! <class>:<grade>[*<grade>] ...      (height lines of width tokens)
//!
//! UCM1 <width> <height> <num_classes>
//! <class>|- ...                      (`-` marks an unevaluated pixel)
//! ```
//!
//! Grades are `s` (sure), `m` (moderately sure) and `n` (not sure). A `*<grade>`
//! suffix flags the pixel as a reference boundary with its own grade. Class 0
//! is reserved for content outside the classifier's label set.

use std::fmt::Write as _;
use std::io::BufRead;

use num_integer::Integer;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{format_rational, parse_rational, Rational};

/// Class id reserved for unmodeled reference content (shadow, other).
pub const UNMODELED: u16 = 0;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Grade {
    Sure,
    ModeratelySure,
    NotSure,
}

impl Grade {
    pub const ALL: [Grade; 3] = [Grade::Sure, Grade::ModeratelySure, Grade::NotSure];

    pub fn token(self) -> char {
        match self {
            Grade::Sure => 's',
            Grade::ModeratelySure => 'm',
            Grade::NotSure => 'n',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Grade::Sure => "sure",
            Grade::ModeratelySure => "moderately-sure",
            Grade::NotSure => "not-sure",
        }
    }

    pub fn from_token(token: &str) -> Result<Grade> {
        match token {
            "s" => Ok(Grade::Sure),
            "m" => Ok(Grade::ModeratelySure),
            "n" => Ok(Grade::NotSure),
            other => Err(Error::UnknownGrade(other.to_string())),
        }
    }

    /// Accepts either the long name or the one-letter token.
    pub fn from_name(name: &str) -> Result<Grade> {
        Grade::ALL
            .into_iter()
            .find(|g| g.name() == name)
            .map(Ok)
            .unwrap_or_else(|| Grade::from_token(name))
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Weights attached to the three certainty grades.
///
/// Weights lie in (0, 1] and strictly decrease with certainty. The one
/// exception is a scheme where every grade has the same weight, which
/// expresses classical (certainty-blind) evaluation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertaintyScheme {
    weights: [Rational; 3],
}

impl Default for CertaintyScheme {
    /// 2/3 for sure, 1/2 for moderately sure, 1/3 for not sure.
    fn default() -> Self {
        CertaintyScheme {
            weights: [Rational::new(2, 3), Rational::new(1, 2), Rational::new(1, 3)],
        }
    }
}

impl CertaintyScheme {
    pub fn new(sure: Rational, moderately_sure: Rational, not_sure: Rational) -> Result<Self> {
        let weights = [sure, moderately_sure, not_sure];
        for w in &weights {
            if *w <= Rational::zero() || *w > Rational::one() {
                return Err(Error::InvalidScheme(format!(
                    "weight {} outside (0, 1]",
                    format_rational(w)
                )));
            }
        }
        let uniform = weights[0] == weights[1] && weights[1] == weights[2];
        if !uniform && !(weights[0] > weights[1] && weights[1] > weights[2]) {
            return Err(Error::InvalidScheme(
                "weights must strictly decrease with certainty".into(),
            ));
        }
        Ok(CertaintyScheme { weights })
    }

    /// Every grade weighs 1.
    pub fn unweighted() -> Self {
        CertaintyScheme {
            weights: [Rational::one(); 3],
        }
    }

    /// Parses `"2/3,1/2,1/3"` (sure, moderately sure, not sure).
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidScheme(format!(
                "expected three comma-separated weights, got `{text}`"
            )));
        }
        let mut weights = [Rational::zero(); 3];
        for (slot, part) in weights.iter_mut().zip(&parts) {
            *slot = parse_rational(part)
                .ok_or_else(|| Error::InvalidScheme(format!("bad weight `{part}`")))?;
        }
        CertaintyScheme::new(weights[0], weights[1], weights[2])
    }

    pub fn weight(&self, grade: Grade) -> Rational {
        self.weights[grade.index()]
    }

    /// Ordered (grade name, weight) pairs, most certain first.
    pub fn grade_weights(&self) -> impl Iterator<Item = (&'static str, Rational)> + '_ {
        Grade::ALL.into_iter().map(|g| (g.name(), self.weight(g)))
    }

    pub fn max_weight(&self) -> Rational {
        self.weights.iter().copied().max().unwrap_or_else(Rational::zero)
    }

    /// Least common multiple of the weight denominators.
    pub(crate) fn common_denominator(&self) -> i128 {
        self.weights.iter().fold(1, |acc, w| acc.lcm(w.denom()))
    }

    pub fn to_spec_string(&self) -> String {
        self.weights.iter().map(format_rational).collect::<Vec<_>>().join(",")
    }
}

/// Weight of a grade given by its name (`sure`, `moderately-sure`,
/// `not-sure`) or token (`s`, `m`, `n`).
pub fn certainty_weight(grade: &str, scheme: &CertaintyScheme) -> Result<Rational> {
    Ok(scheme.weight(Grade::from_name(grade)?))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ExpertPixel {
    pub class: u16,
    pub grade: Grade,
    /// Grade of the boundary mark, when the expert flagged this pixel as boundary.
    pub boundary: Option<Grade>,
}

impl ExpertPixel {
    pub fn new(class: u16, grade: Grade) -> Self {
        ExpertPixel {
            class,
            grade,
            boundary: None,
        }
    }

    pub fn with_boundary(mut self, grade: Grade) -> Self {
        self.boundary = Some(grade);
        self
    }
}

/// One expert's reading of one image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpertMap {
    width: usize,
    height: usize,
    num_classes: usize,
    pixels: Vec<ExpertPixel>,
}

impl ExpertMap {
    /// `pixels` in row-major order.
    pub fn new(
        width: usize,
        height: usize,
        num_classes: usize,
        pixels: Vec<ExpertPixel>,
    ) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                found: (pixels.len(), 1),
            });
        }
        if let Some(p) = pixels.iter().find(|p| p.class as usize > num_classes) {
            return Err(Error::ClassOutOfRange {
                class: p.class as usize,
                max: num_classes,
            });
        }
        Ok(ExpertMap {
            width,
            height,
            num_classes,
            pixels,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        num_classes: usize,
        mut f: impl FnMut(usize, usize) -> ExpertPixel,
    ) -> Result<Self> {
        let pixels = (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        ExpertMap::new(width, height, num_classes, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, row: usize, col: usize) -> &ExpertPixel {
        &self.pixels[row * self.width + col]
    }

    pub fn pixels(&self) -> &[ExpertPixel] {
        &self.pixels
    }

    pub fn parse(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.split(b'\n').enumerate();
        let (width, height, num_classes) = parse_header(lines.next(), "UEM1")?;
        let mut pixels = Vec::with_capacity(width * height);
        for row in 0..height {
            let (idx, line) = next_line(&mut lines, row + 2)?;
            let before = pixels.len();
            for token in line.split_ascii_whitespace() {
                pixels.push(parse_expert_token(token, num_classes, idx + 1)?);
            }
            check_row_length(pixels.len() - before, width, idx + 1)?;
        }
        expect_end(lines)?;
        ExpertMap::new(width, height, num_classes, pixels)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        ExpertMap::parse(text.as_bytes())
    }

    pub fn to_uem(&self) -> String {
        let mut out = format!("UEM1 {} {} {}\n", self.width, self.height, self.num_classes);
        for row in self.pixels.chunks(self.width) {
            for (i, p) in row.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{}:{}", p.class, p.grade.token());
                if let Some(b) = p.boundary {
                    let _ = write!(out, "*{}", b.token());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Predicted labels; `None` marks pixels left out of the evaluation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassMap {
    width: usize,
    height: usize,
    num_classes: usize,
    labels: Vec<Option<u16>>,
}

impl ClassMap {
    pub fn new(
        width: usize,
        height: usize,
        num_classes: usize,
        labels: Vec<Option<u16>>,
    ) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                found: (labels.len(), 1),
            });
        }
        if let Some(c) = labels.iter().flatten().find(|&&c| c as usize > num_classes) {
            return Err(Error::ClassOutOfRange {
                class: *c as usize,
                max: num_classes,
            });
        }
        Ok(ClassMap {
            width,
            height,
            num_classes,
            labels,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        num_classes: usize,
        mut f: impl FnMut(usize, usize) -> Option<u16>,
    ) -> Result<Self> {
        let labels = (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        ClassMap::new(width, height, num_classes, labels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, row: usize, col: usize) -> Option<u16> {
        self.labels[row * self.width + col]
    }

    pub fn labels(&self) -> &[Option<u16>] {
        &self.labels
    }

    pub fn parse(reader: impl BufRead) -> Result<Self> {
        let mut lines = reader.split(b'\n').enumerate();
        let (width, height, num_classes) = parse_header(lines.next(), "UCM1")?;
        let mut labels = Vec::with_capacity(width * height);
        for row in 0..height {
            let (idx, line) = next_line(&mut lines, row + 2)?;
            let before = labels.len();
            for token in line.split_ascii_whitespace() {
                let label = if token == "-" {
                    None
                } else {
                    Some(parse_class(token, num_classes, idx + 1)?)
                };
                labels.push(label);
            }
            check_row_length(labels.len() - before, width, idx + 1)?;
        }
        expect_end(lines)?;
        ClassMap::new(width, height, num_classes, labels)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        ClassMap::parse(text.as_bytes())
    }

    pub fn to_ucm(&self) -> String {
        let mut out = format!("UCM1 {} {} {}\n", self.width, self.height, self.num_classes);
        for row in self.labels.chunks(self.width) {
            for (i, label) in row.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                match label {
                    Some(c) => {
                        let _ = write!(out, "{c}");
                    }
                    None => out.push('-'),
                }
            }
            out.push('\n');
        }
        out
    }
}

type Lines<R> = std::iter::Enumerate<std::io::Split<R>>;

fn decode_line(idx: usize, raw: std::io::Result<Vec<u8>>) -> Result<String> {
    let bytes = raw?;
    if !bytes.is_ascii() {
        return Err(Error::parse(idx + 1, "non-ASCII content"));
    }
    if bytes.contains(&b'\r') {
        return Err(Error::parse(idx + 1, "carriage return in line (LF endings required)"));
    }
    Ok(String::from_utf8(bytes).expect("ASCII is valid UTF-8"))
}

fn parse_header(
    first: Option<(usize, std::io::Result<Vec<u8>>)>,
    magic: &str,
) -> Result<(usize, usize, usize)> {
    let (idx, raw) = first.ok_or_else(|| Error::parse(1, "missing header"))?;
    let line = decode_line(idx, raw)?;
    let fields: Vec<&str> = line.split_ascii_whitespace().collect();
    if fields.len() != 4 || fields[0] != magic {
        return Err(Error::parse(1, format!("expected `{magic} <width> <height> <num_classes>`")));
    }
    let num = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::parse(1, format!("bad {what} `{s}`")))
    };
    let width = num(fields[1], "width")?;
    let height = num(fields[2], "height")?;
    let classes = num(fields[3], "class count")?;
    if width == 0 || height == 0 {
        return Err(Error::parse(1, "width and height must be positive"));
    }
    if classes == 0 || classes >= u16::MAX as usize {
        return Err(Error::parse(1, format!("bad class count `{classes}`")));
    }
    Ok((width, height, classes))
}

fn next_line<R: BufRead>(lines: &mut Lines<R>, expected_line: usize) -> Result<(usize, String)> {
    let (idx, raw) = lines
        .next()
        .ok_or_else(|| Error::parse(expected_line, "missing row"))?;
    Ok((idx, decode_line(idx, raw)?))
}

fn check_row_length(found: usize, width: usize, line: usize) -> Result<()> {
    if found != width {
        return Err(Error::parse(
            line,
            format!("row length {found} does not match width {width}"),
        ));
    }
    Ok(())
}

fn expect_end<R: BufRead>(lines: Lines<R>) -> Result<()> {
    for (idx, raw) in lines {
        let line = decode_line(idx, raw)?;
        if !line.trim().is_empty() {
            return Err(Error::parse(idx + 1, "more rows than the declared height"));
        }
    }
    Ok(())
}

fn parse_class(token: &str, num_classes: usize, line: usize) -> Result<u16> {
    let class: usize = token
        .parse()
        .map_err(|_| Error::parse(line, format!("bad class `{token}`")))?;
    if class > num_classes {
        return Err(Error::parse(
            line,
            format!("class {class} out of range 0..={num_classes}"),
        ));
    }
    Ok(class as u16)
}

fn parse_expert_token(token: &str, num_classes: usize, line: usize) -> Result<ExpertPixel> {
    let (class, rest) = token
        .split_once(':')
        .ok_or_else(|| Error::parse(line, format!("token `{token}` lacks `:<grade>`")))?;
    let class = parse_class(class, num_classes, line)?;
    let (grade, boundary) = match rest.split_once('*') {
        Some((g, b)) => (g, Some(b)),
        None => (rest, None),
    };
    let mut pixel = ExpertPixel::new(class, Grade::from_token(grade)?);
    if let Some(b) = boundary {
        pixel.boundary = Some(Grade::from_token(b)?);
    }
    Ok(pixel)
}

/// Square unit on which the classifier emits one label.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Tile {
    pub row: usize,
    pub col: usize,
    pub size: usize,
}

impl Tile {
    /// Pixel whose predicted label stands for the whole tile.
    pub fn center(&self) -> (usize, usize) {
        (self.row + self.size / 2, self.col + self.size / 2)
    }

    pub fn area(&self) -> usize {
        self.size * self.size
    }
}

/// Placement of `size`×`size` tiles every `step` pixels from `offset`,
/// keeping only tiles that lie fully inside the image.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Tiling {
    size: usize,
    step: usize,
    offset: (usize, usize),
}

impl Tiling {
    pub fn new(size: usize, step: usize, offset: (usize, usize)) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidTiling("tile size must be at least 1".into()));
        }
        if step == 0 {
            return Err(Error::InvalidTiling("step must be at least 1".into()));
        }
        Ok(Tiling { size, step, offset })
    }

    /// Non-overlapping tiles anchored at the origin.
    pub fn non_overlapping(size: usize) -> Result<Self> {
        Tiling::new(size, size, (0, 0))
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn offset(&self) -> (usize, usize) {
        self.offset
    }

    pub fn tiles(&self, width: usize, height: usize) -> impl Iterator<Item = Tile> + '_ {
        let starts = move |offset: usize, extent: usize| {
            (offset..)
                .step_by(self.step)
                .take_while(move |&s| s + self.size <= extent)
        };
        starts(self.offset.0, height).flat_map(move |row| {
            starts(self.offset.1, width).map(move |col| Tile {
                row,
                col,
                size: self.size,
            })
        })
    }
}

/// Certainty-weighted class composition of one tile: for each class present,
/// the sum of its pixels' grade weights divided by the tile area.
///
/// Entries are sorted by class id and only classes that occur are listed.
pub fn tile_composition(
    map: &ExpertMap,
    tile: Tile,
    scheme: &CertaintyScheme,
) -> Vec<(u16, Rational)> {
    assert!(
        tile.row + tile.size <= map.height && tile.col + tile.size <= map.width,
        "tile outside map"
    );
    let denom = scheme.common_denominator();
    let scaled: [i128; 3] = Grade::ALL.map(|g| {
        let w = scheme.weight(g);
        w.numer() * (denom / w.denom())
    });
    let mut sums = vec![0i128; map.num_classes + 1];
    for r in tile.row..tile.row + tile.size {
        for p in &map.pixels[r * map.width + tile.col..r * map.width + tile.col + tile.size] {
            sums[p.class as usize] += scaled[p.grade.index()];
        }
    }
    let area = tile.area() as i128 * denom;
    sums.into_iter()
        .enumerate()
        .filter(|(_, s)| *s > 0)
        .map(|(class, s)| (class as u16, Rational::new(s, area)))
        .collect()
}
