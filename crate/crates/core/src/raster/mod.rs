//! Image and label-grid primitives.
//!
//! [`Grid`] is a row-major raster shared by grayscale images ([`GrayImage`])
//! and three-class semantic masks ([`ClassMask`]). The submodules provide
//! bilinear rescaling, sliding-window tiling with center-priority stitching,
//! and binary morphology on the mask foreground.

mod morphology;
mod resample;
mod tiling;

pub use morphology::{morphological_open, DEFAULT_SE_HALF};
pub use resample::{rescale_bilinear, rescale_bilinear_values};
pub use tiling::{extract_tile, plan_tiles, stitch, TileLayout, DEFAULT_STRIDE, DEFAULT_WINDOW};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-pixel semantic class produced by the segmentation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[repr(u8)]
pub enum Label {
    #[default]
    Background = 0,
    Body = 1,
    Boundary = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Background, Label::Body, Label::Boundary];

    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Background),
            1 => Some(Label::Body),
            2 => Some(Label::Boundary),
            _ => None,
        }
    }

    #[inline]
    pub fn is_foreground(self) -> bool {
        self != Label::Background
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Background => "background",
            Label::Body => "body",
            Label::Boundary => "boundary",
        }
    }
}

/// Row-major raster with at least one pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

pub type GrayImage = Grid<u8>;
pub type ClassMask = Grid<Label>;

impl<T: Copy> Grid<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "grid dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} values for {width}x{height}, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl ClassMask {
    /// Builds a mask from raw label bytes, rejecting anything outside {0, 1, 2}.
    pub fn from_raw(width: usize, height: usize, raw: &[u8]) -> Result<Self> {
        if raw.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} label values, got {}",
                width * height,
                raw.len()
            )));
        }
        let mut data = Vec::with_capacity(raw.len());
        for (i, &v) in raw.iter().enumerate() {
            match Label::from_u8(v) {
                Some(l) => data.push(l),
                None => {
                    return Err(Error::InvalidLabel {
                        value: v as u16,
                        x: i % width.max(1),
                        y: i / width.max(1),
                    })
                }
            }
        }
        Grid::new(width, height, data)
    }

    pub fn to_raw(&self) -> Vec<u8> {
        self.data.iter().map(|&l| l as u8).collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.data.iter().filter(|&&l| l == label).count()
    }
}

/// Physical scale of the imagery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    cm_per_pixel: f64,
}

impl Calibration {
    pub fn new(cm_per_pixel: f64) -> Result<Self> {
        if !(cm_per_pixel.is_finite() && cm_per_pixel > 0.0) {
            return Err(Error::invalid(format!(
                "cm_per_pixel must be positive and finite, got {cm_per_pixel}"
            )));
        }
        Ok(Self { cm_per_pixel })
    }

    #[inline]
    pub fn cm_per_pixel(&self) -> f64 {
        self.cm_per_pixel
    }

    pub fn to_cm(&self, px: f64) -> f64 {
        px * self.cm_per_pixel
    }
}

/// Mirror index into `[0, len)` without repeating the edge sample
/// (`.. 2 1 | 0 1 2 .. n-1 | n-2 n-3 ..`), periodic for arbitrarily far offsets.
pub(crate) fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_shapes() {
        assert!(Grid::new(0, 3, Vec::<u8>::new()).is_err());
        assert!(Grid::new(2, 2, vec![0u8; 3]).is_err());
        assert!(Grid::new(2, 2, vec![0u8; 4]).is_ok());
    }

    #[test]
    fn class_mask_rejects_unknown_labels() {
        let err = ClassMask::from_raw(2, 2, &[0, 1, 7, 2]).unwrap_err();
        assert!(matches!(err, Error::InvalidLabel { value: 7, x: 0, y: 1 }));
        assert!(err.to_string().contains("invalid class label"));
        let m = ClassMask::from_raw(2, 2, &[0, 1, 2, 2]).unwrap();
        assert_eq!(m.count(Label::Boundary), 2);
        assert_eq!(m.to_raw(), vec![0, 1, 2, 2]);
    }

    #[test]
    fn calibration_must_be_positive() {
        assert!(Calibration::new(0.0).is_err());
        assert!(Calibration::new(-1.0).is_err());
        assert!(Calibration::new(f64::NAN).is_err());
        assert_eq!(Calibration::new(0.125).unwrap().to_cm(10.0), 1.25);
    }

    #[test]
    fn reflect_mirrors_without_edge_repeat() {
        let got: Vec<usize> = (-3..8).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 1]);
        assert_eq!(reflect_index(17, 1), 0);
    }
}
