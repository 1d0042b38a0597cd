//! Disparity and label rasters, plus their on-disk encodings.
//!
//! Disparity is stored as a 16-bit grayscale PNG holding `round(d * 256)`
//! (0 means no measurement). Labels are an 8-bit grayscale PNG holding the
//! [`PixelClass`] codes below.

use std::path::Path;

use image::{ImageBuffer, Luma};
use thiserror::Error;

use crate::stixel::SemanticClass;

/// Fixed-point scale of the 16-bit disparity encoding.
pub const DISPARITY_SCALE: f64 = 256.0;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("raster i/o: {0}")]
    Image(#[from] image::ImageError),
    #[error("raster size {got:?} does not match expected {expected:?}")]
    Size {
        got: (u32, u32),
        expected: (u32, u32),
    },
}

/// Per-pixel class codes of the label raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum PixelClass {
    Sky = 0,
    Ground = 1,
    Vehicle = 2,
    Pedestrian = 3,
    Building = 4,
    Other = 5,
}

impl PixelClass {
    pub fn from_code(code: u8) -> PixelClass {
        match code {
            1 => PixelClass::Ground,
            2 => PixelClass::Vehicle,
            3 => PixelClass::Pedestrian,
            4 => PixelClass::Building,
            5 => PixelClass::Other,
            _ => PixelClass::Sky,
        }
    }

    /// Obstacle class, or `None` for free space (sky and ground).
    pub fn semantic(self) -> Option<SemanticClass> {
        match self {
            PixelClass::Vehicle => Some(SemanticClass::Vehicle),
            PixelClass::Pedestrian => Some(SemanticClass::Pedestrian),
            PixelClass::Building => Some(SemanticClass::Building),
            PixelClass::Other => Some(SemanticClass::Other),
            PixelClass::Sky | PixelClass::Ground => None,
        }
    }
}

impl From<SemanticClass> for PixelClass {
    fn from(c: SemanticClass) -> Self {
        match c {
            SemanticClass::Vehicle => PixelClass::Vehicle,
            SemanticClass::Pedestrian => PixelClass::Pedestrian,
            SemanticClass::Building => PixelClass::Building,
            SemanticClass::Other => PixelClass::Other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisparityImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl DisparityImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; (width * height) as usize],
        }
    }

    pub fn get(&self, u: u32, v: u32) -> f32 {
        self.data[(v * self.width + u) as usize]
    }

    pub fn set(&mut self, u: u32, v: u32, d: f32) {
        self.data[(v * self.width + u) as usize] = d;
    }

    /// Rounds every value to the 1/256 px grid of the file encoding.
    pub fn quantized(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&d| decode(encode(d))).collect(),
        }
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_raw(
            self.width,
            self.height,
            self.data.iter().map(|&d| encode(d)).collect(),
        )
        .expect("buffer length matches dimensions");
        buf.save(path)?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<Self, RasterError> {
        let img = image::open(path)?.into_luma16();
        let (width, height) = img.dimensions();
        Ok(Self {
            width,
            height,
            data: img.into_raw().into_iter().map(decode).collect(),
        })
    }
}

fn encode(d: f32) -> u16 {
    (d as f64 * DISPARITY_SCALE)
        .round()
        .clamp(0.0, u16::MAX as f64) as u16
}

fn decode(raw: u16) -> f32 {
    (raw as f64 / DISPARITY_SCALE) as f32
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl LabelImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![PixelClass::Sky as u8; (width * height) as usize],
        }
    }

    pub fn get(&self, u: u32, v: u32) -> PixelClass {
        PixelClass::from_code(self.data[(v * self.width + u) as usize])
    }

    pub fn set(&mut self, u: u32, v: u32, c: PixelClass) {
        self.data[(v * self.width + u) as usize] = c as u8;
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
            ImageBuffer::from_raw(self.width, self.height, self.data.clone())
                .expect("buffer length matches dimensions");
        buf.save(path)?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<Self, RasterError> {
        let img = image::open(path)?.into_luma8();
        let (width, height) = img.dimensions();
        Ok(Self {
            width,
            height,
            data: img.into_raw(),
        })
    }
}
