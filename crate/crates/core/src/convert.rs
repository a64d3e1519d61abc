//! Conversion of 8-bit PGM rasters into UEM/UCM maps through a value table.
//!
//! The table is a headerless CSV, one row per gray value:
//!
//! ```text
//! # value,class,grade[,boundary-grade]
//! 0,0,s
//! 1,1,s
//! 2,1,m,s
//! 3,-
//! ```
//!
//! `-` as the class masks the pixel (class maps only). Grades are optional
//! when producing class maps and required for expert maps.

use std::collections::BTreeMap;
use std::io::Read;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};
use crate::label::{ClassMap, ExpertMap, ExpertPixel, Grade};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct MappedValue {
    /// `None` masks the pixel.
    pub class: Option<u16>,
    pub grade: Option<Grade>,
    pub boundary: Option<Grade>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValueMapping {
    entries: BTreeMap<u8, MappedValue>,
}

impl ValueMapping {
    pub fn insert(&mut self, value: u8, mapped: MappedValue) {
        self.entries.insert(value, mapped);
    }

    pub fn get(&self, value: u8) -> Option<&MappedValue> {
        self.entries.get(&value)
    }

    pub fn max_class(&self) -> u16 {
        self.entries.values().filter_map(|m| m.class).max().unwrap_or(0)
    }

    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut mapping = ValueMapping::default();
        for (i, record) in csv.records().enumerate() {
            let record = record?;
            let line = record.position().map_or(i + 1, |p| p.line() as usize);
            let field = |k: usize| record.get(k).filter(|s| !s.is_empty());
            if record.len() < 2 || record.len() > 4 {
                return Err(Error::parse(line, "expected value,class[,grade[,boundary]]"));
            }
            let value: u8 = field(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(line, "gray value must be 0..=255"))?;
            let class = match field(1) {
                Some("-") => None,
                Some(s) => Some(
                    s.parse::<u16>()
                        .map_err(|_| Error::parse(line, format!("bad class `{s}`")))?,
                ),
                None => return Err(Error::parse(line, "missing class")),
            };
            let grade = field(2).map(Grade::from_name).transpose()?;
            let boundary = field(3).map(Grade::from_name).transpose()?;
            if mapping.entries.contains_key(&value) {
                return Err(Error::parse(line, format!("value {value} mapped twice")));
            }
            mapping.insert(value, MappedValue { class, grade, boundary });
        }
        Ok(mapping)
    }
}

/// 8-bit single-channel raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// Decodes a plain (P2) or binary (P5) PGM with maxval at most 255.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let magic = bytes.get(..2);
    if magic != Some(b"P2") && magic != Some(b"P5") {
        return Err(Error::parse(1, "expected a P2 or P5 PGM file"));
    }
    match image::load_from_memory_with_format(bytes, ImageFormat::Pnm)? {
        DynamicImage::ImageLuma8(img) => Ok(GrayImage {
            width: img.width() as usize,
            height: img.height() as usize,
            data: img.into_raw(),
        }),
        _ => Err(Error::parse(1, "PGM must be 8-bit single channel")),
    }
}

fn lookup<'a>(mapping: &'a ValueMapping, img: &GrayImage, i: usize) -> Result<&'a MappedValue> {
    let value = img.data[i];
    mapping.get(value).ok_or(Error::UnmappedValue {
        value,
        row: i / img.width,
        col: i % img.width,
    })
}

/// `num_classes` defaults to the largest class in the table.
pub fn to_expert_map(img: &GrayImage, mapping: &ValueMapping, num_classes: Option<usize>) -> Result<ExpertMap> {
    let classes = num_classes.unwrap_or(mapping.max_class().max(1) as usize);
    let pixels = (0..img.data.len())
        .map(|i| {
            let m = lookup(mapping, img, i)?;
            let (row, col) = (i / img.width, i % img.width);
            let class = m.class.ok_or(Error::InvalidBoundary {
                row,
                col,
                reason: "expert maps cannot mask pixels",
            })?;
            let grade = m.grade.ok_or(Error::UnknownGrade(format!(
                "(none) for value {} at ({row}, {col})",
                img.data[i]
            )))?;
            Ok(ExpertPixel {
                class,
                grade,
                boundary: m.boundary,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ExpertMap::new(img.width, img.height, classes, pixels)
}

pub fn to_class_map(img: &GrayImage, mapping: &ValueMapping, num_classes: Option<usize>) -> Result<ClassMap> {
    let classes = num_classes.unwrap_or(mapping.max_class().max(1) as usize);
    let labels = (0..img.data.len())
        .map(|i| Ok(lookup(mapping, img, i)?.class))
        .collect::<Result<Vec<_>>>()?;
    ClassMap::new(img.width, img.height, classes, labels)
}
