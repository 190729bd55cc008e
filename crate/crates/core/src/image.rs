//! Unit-interval image grids.
//!
//! Pixels are stored row-major with interleaved channels (height, width,
//! channel), as `f32` values in `[0, 1]`.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {height}x{width}")]
    EmptyShape { height: usize, width: usize },
    #[error("unsupported channel count {0}, expected 1 or 3")]
    Channels(usize),
    #[error("expected {expected} values for the declared shape, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("pixel {index} = {value} lies outside [0, 1]")]
    OutOfRange { index: usize, value: f32 },
    #[error("png encoding failed: {0}")]
    Encode(#[from] ::image::ImageError),
}

/// Shape of an image, `height x width x channels`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    shape: Shape,
    data: Vec<f32>,
}

impl Image {
    /// Builds an image after checking the shape and the `[0, 1]` range of
    /// every value.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::EmptyShape { height, width });
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::Channels(channels));
        }
        let shape = Shape::new(height, width, channels);
        if data.len() != shape.len() {
            return Err(ImageError::Length {
                expected: shape.len(),
                actual: data.len(),
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self { shape, data })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32) -> Result<Self, ImageError> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Builds an image from 8-bit intensities, scaling by 1/255.
    pub fn from_bytes(height: usize, width: usize, channels: usize, bytes: &[u8]) -> Result<Self, ImageError> {
        Self::new(
            height,
            width,
            channels,
            bytes.iter().map(|&b| f32::from(b) / 255.0).collect(),
        )
    }

    /// Internal constructor for pipeline stages that already clamp.
    pub(crate) fn from_clamped(shape: Shape, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), shape.len());
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.shape.width + x) * self.shape.channels + c]
    }

    /// Quantizes to 8-bit intensities, `round(value * 255)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Writes an 8-bit grayscale or RGB PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let color = if self.shape.channels == 1 {
            ::image::ExtendedColorType::L8
        } else {
            ::image::ExtendedColorType::Rgb8
        };
        ::image::save_buffer(
            path,
            &self.to_bytes(),
            self.shape.width as u32,
            self.shape.height as u32,
            color,
        )?;
        Ok(())
    }

    /// Reads a PNG as grayscale when it has no color information, RGB
    /// otherwise. Alpha is dropped.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        let decoded = ::image::open(path)?;
        let (width, height) = (decoded.width() as usize, decoded.height() as usize);
        if decoded.color().has_color() {
            let rgb = decoded.into_rgb8();
            Self::from_bytes(height, width, 3, rgb.as_raw())
        } else {
            let luma = decoded.into_luma8();
            Self::from_bytes(height, width, 1, luma.as_raw())
        }
    }
}
