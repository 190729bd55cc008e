//! Compound metamorphic image transformation.
//!
//! A [`TransformVector`] drives a pixel-value chain (contrast, brightness,
//! blur, sharpening, uniform noise, in that order) and four affine warps,
//! each applied separately to the chain's output. The five resulting
//! mutants form a [`MutantBatch`]; [`Transformer::filter_valid`] keeps the
//! ones that stay structurally similar to the source.

mod ssim;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{Image, Shape};

pub use ssim::{ssim, ssim_with_window, DEFAULT_SSIM_WINDOW};

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("{name} = {value} lies outside [{low}, {high}]")]
    OutOfBounds {
        name: &'static str,
        value: f64,
        low: f64,
        high: f64,
    },
    #[error("bounds for {name} are inverted or non-finite: [{low}, {high}]")]
    InvalidBounds { name: &'static str, low: f64, high: f64 },
    #[error("bounds for {name} exclude the identity value {identity}")]
    IdentityOutsideBounds { name: &'static str, identity: f64 },
    #[error("image shapes differ: {0} vs {1}")]
    ShapeMismatch(Shape, Shape),
}

/// Number of components in a [`TransformVector`].
pub const DIM: usize = 11;

/// Parameters of the compound transformation.
///
/// Translations are fractions of the image width/height; the rotation is
/// in degrees, positive angles turning clockwise on screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformVector {
    pub contrast: f64,
    pub brightness: f64,
    pub blur_sigma: f64,
    pub sharpen: f64,
    pub noise: f64,
    pub translate_x: f64,
    pub translate_y: f64,
    pub scale_x: f64,
    pub scale_y: f64,
    pub shear: f64,
    pub rotation: f64,
}

impl TransformVector {
    pub const NAMES: [&'static str; DIM] = [
        "contrast",
        "brightness",
        "blur_sigma",
        "sharpen",
        "noise",
        "translate_x",
        "translate_y",
        "scale_x",
        "scale_y",
        "shear",
        "rotation",
    ];

    pub const IDENTITY: TransformVector = TransformVector {
        contrast: 1.0,
        brightness: 0.0,
        blur_sigma: 0.0,
        sharpen: 0.0,
        noise: 0.0,
        translate_x: 0.0,
        translate_y: 0.0,
        scale_x: 1.0,
        scale_y: 1.0,
        shear: 0.0,
        rotation: 0.0,
    };

    pub fn to_array(&self) -> [f64; DIM] {
        [
            self.contrast,
            self.brightness,
            self.blur_sigma,
            self.sharpen,
            self.noise,
            self.translate_x,
            self.translate_y,
            self.scale_x,
            self.scale_y,
            self.shear,
            self.rotation,
        ]
    }

    pub fn from_array(v: [f64; DIM]) -> Self {
        Self {
            contrast: v[0],
            brightness: v[1],
            blur_sigma: v[2],
            sharpen: v[3],
            noise: v[4],
            translate_x: v[5],
            translate_y: v[6],
            scale_x: v[7],
            scale_y: v[8],
            shear: v[9],
            rotation: v[10],
        }
    }

    /// Panics unless `v.len() == DIM`.
    pub fn from_slice(v: &[f64]) -> Self {
        Self::from_array(v.try_into().expect("transform vector has 11 components"))
    }
}

impl Default for TransformVector {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Search box for transform vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub low: TransformVector,
    pub high: TransformVector,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            low: TransformVector {
                contrast: 0.7,
                brightness: -0.15,
                blur_sigma: 0.0,
                sharpen: 0.0,
                noise: 0.0,
                translate_x: -0.1,
                translate_y: -0.1,
                scale_x: 0.85,
                scale_y: 0.85,
                shear: -0.15,
                rotation: -15.0,
            },
            high: TransformVector {
                contrast: 1.3,
                brightness: 0.15,
                blur_sigma: 1.5,
                sharpen: 0.5,
                noise: 0.05,
                translate_x: 0.1,
                translate_y: 0.1,
                scale_x: 1.15,
                scale_y: 1.15,
                shear: 0.15,
                rotation: 15.0,
            },
        }
    }
}

impl Bounds {
    pub fn validate(&self) -> Result<(), TransformError> {
        let (low, high, id) = (self.low.to_array(), self.high.to_array(), TransformVector::IDENTITY.to_array());
        for i in 0..DIM {
            let name = TransformVector::NAMES[i];
            if !(low[i].is_finite() && high[i].is_finite() && low[i] <= high[i]) {
                return Err(TransformError::InvalidBounds {
                    name,
                    low: low[i],
                    high: high[i],
                });
            }
            if !(low[i]..=high[i]).contains(&id[i]) {
                return Err(TransformError::IdentityOutsideBounds { name, identity: id[i] });
            }
        }
        Ok(())
    }

    pub fn check(&self, v: &TransformVector) -> Result<(), TransformError> {
        let (low, high, vals) = (self.low.to_array(), self.high.to_array(), v.to_array());
        for i in 0..DIM {
            if !(vals[i].is_finite() && vals[i] >= low[i] && vals[i] <= high[i]) {
                return Err(TransformError::OutOfBounds {
                    name: TransformVector::NAMES[i],
                    value: vals[i],
                    low: low[i],
                    high: high[i],
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffineKind {
    Translate,
    Scale,
    Shear,
    Rotate,
}

impl AffineKind {
    pub const ALL: [AffineKind; 4] = [
        AffineKind::Translate,
        AffineKind::Scale,
        AffineKind::Shear,
        AffineKind::Rotate,
    ];
}

/// Which slot of a [`MutantBatch`] a mutant came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutantPath {
    PixelOnly,
    Translate,
    Scale,
    Shear,
    Rotate,
}

impl MutantPath {
    pub const ALL: [MutantPath; 5] = [
        MutantPath::PixelOnly,
        MutantPath::Translate,
        MutantPath::Scale,
        MutantPath::Shear,
        MutantPath::Rotate,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MutantPath::PixelOnly => "pixel_only",
            MutantPath::Translate => "translate",
            MutantPath::Scale => "scale",
            MutantPath::Shear => "shear",
            MutantPath::Rotate => "rotate",
        }
    }
}

impl From<AffineKind> for MutantPath {
    fn from(kind: AffineKind) -> Self {
        match kind {
            AffineKind::Translate => MutantPath::Translate,
            AffineKind::Scale => MutantPath::Scale,
            AffineKind::Shear => MutantPath::Shear,
            AffineKind::Rotate => MutantPath::Rotate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutantBatch {
    pub pixel_only: Image,
    /// Translated, scaled, sheared, rotated; each warps `pixel_only`.
    pub per_affine: [Image; 4],
}

impl MutantBatch {
    pub fn get(&self, path: MutantPath) -> &Image {
        match path {
            MutantPath::PixelOnly => &self.pixel_only,
            MutantPath::Translate => &self.per_affine[0],
            MutantPath::Scale => &self.per_affine[1],
            MutantPath::Shear => &self.per_affine[2],
            MutantPath::Rotate => &self.per_affine[3],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (MutantPath, &Image)> {
        MutantPath::ALL.into_iter().map(move |p| (p, self.get(p)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Survivor {
    pub path: MutantPath,
    pub image: Image,
    pub ssim: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformSettings {
    /// Gaussian sigma of the unsharp-mask blur.
    pub sharpen_sigma: f64,
    /// Side of the square SSIM window.
    pub ssim_window: usize,
}

impl Default for TransformSettings {
    fn default() -> Self {
        Self {
            sharpen_sigma: 1.0,
            ssim_window: DEFAULT_SSIM_WINDOW,
        }
    }
}

/// Blur sigmas at or below this are treated as "no blur".
const SIGMA_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Transformer {
    bounds: Bounds,
    settings: TransformSettings,
}

impl Transformer {
    pub fn new(bounds: Bounds, settings: TransformSettings) -> Result<Self, TransformError> {
        bounds.validate()?;
        Ok(Self { bounds, settings })
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn settings(&self) -> &TransformSettings {
        &self.settings
    }

    /// Contrast, brightness, blur, sharpening, then noise drawn from `rng`;
    /// the result is clamped to `[0, 1]`.
    pub fn apply_pixel_chain<R: Rng + ?Sized>(
        &self,
        source: &Image,
        v: &TransformVector,
        rng: &mut R,
    ) -> Result<Image, TransformError> {
        self.bounds.check(v)?;
        let shape = source.shape();
        let mut buf: Vec<f64> = source.data().iter().map(|&x| f64::from(x)).collect();

        let means = channel_means(&buf, shape.channels);
        let c = shape.channels;
        for (i, x) in buf.iter_mut().enumerate() {
            *x = *x * v.contrast + means[i % c] * (1.0 - v.contrast);
        }
        for x in buf.iter_mut() {
            *x += v.brightness;
        }
        if v.blur_sigma > SIGMA_EPSILON {
            buf = gaussian_blur(&buf, shape, v.blur_sigma);
        }
        if v.sharpen > 0.0 {
            let blurred = gaussian_blur(&buf, shape, self.settings.sharpen_sigma);
            for (x, b) in buf.iter_mut().zip(&blurred) {
                *x += v.sharpen * (*x - b);
            }
        }
        if v.noise > 0.0 {
            for x in buf.iter_mut() {
                *x += (rng.random::<f64>() * 2.0 - 1.0) * v.noise;
            }
        }
        Ok(Image::from_clamped(
            shape,
            buf.into_iter().map(|x| x.clamp(0.0, 1.0) as f32).collect(),
        ))
    }

    /// Inverse-mapped warp about the image center with bilinear sampling;
    /// samples outside the source read as zero.
    pub fn apply_affine(&self, source: &Image, kind: AffineKind, v: &TransformVector) -> Result<Image, TransformError> {
        self.bounds.check(v)?;
        Ok(warp(source, kind, v))
    }

    pub fn expand<R: Rng + ?Sized>(
        &self,
        source: &Image,
        v: &TransformVector,
        rng: &mut R,
    ) -> Result<MutantBatch, TransformError> {
        let pixel_only = self.apply_pixel_chain(source, v, rng)?;
        let per_affine = AffineKind::ALL.map(|kind| warp(&pixel_only, kind, v));
        Ok(MutantBatch { pixel_only, per_affine })
    }

    /// Mutants whose SSIM against `source` is at least `tau`, in batch order.
    pub fn filter_valid(&self, source: &Image, batch: &MutantBatch, tau: f64) -> Vec<Survivor> {
        batch
            .iter()
            .filter_map(|(path, image)| {
                let score = ssim_with_window(source, image, self.settings.ssim_window)
                    .expect("mutants share the source shape");
                (score >= tau).then(|| Survivor {
                    path,
                    image: image.clone(),
                    ssim: score,
                })
            })
            .collect()
    }
}

fn channel_means(buf: &[f64], channels: usize) -> Vec<f64> {
    let mut sums = vec![0.0; channels];
    for (i, x) in buf.iter().enumerate() {
        sums[i % channels] += x;
    }
    let n = (buf.len() / channels) as f64;
    sums.into_iter().map(|s| s / n).collect()
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Separable Gaussian blur, horizontal pass first, edges replicated.
fn gaussian_blur(buf: &[f64], shape: Shape, sigma: f64) -> Vec<f64> {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (h, w, c) = (shape.height as isize, shape.width as isize, shape.channels);
    let idx = |y: isize, x: isize, ch: usize| (y as usize * w as usize + x as usize) * c + ch;

    let mut horizontal = vec![0.0; buf.len()];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                horizontal[idx(y, x, ch)] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, wt)| wt * buf[idx(y, (x + k as isize - radius).clamp(0, w - 1), ch)])
                    .sum();
            }
        }
    }
    let mut out = vec![0.0; buf.len()];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                out[idx(y, x, ch)] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, wt)| wt * horizontal[idx((y + k as isize - radius).clamp(0, h - 1), x, ch)])
                    .sum();
            }
        }
    }
    out
}

fn warp(source: &Image, kind: AffineKind, v: &TransformVector) -> Image {
    let shape = source.shape();
    let (h, w, c) = (shape.height, shape.width, shape.channels);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (sin, cos) = v.rotation.to_radians().sin_cos();
    let inverse = |x: f64, y: f64| -> (f64, f64) {
        let (dx, dy) = (x - cx, y - cy);
        match kind {
            AffineKind::Translate => (x - v.translate_x * w as f64, y - v.translate_y * h as f64),
            AffineKind::Scale => (cx + dx / v.scale_x, cy + dy / v.scale_y),
            AffineKind::Shear => (x - v.shear * dy, y),
            AffineKind::Rotate => (cx + cos * dx + sin * dy, cy - sin * dx + cos * dy),
        }
    };
    let sample = |ix: isize, iy: isize, ch: usize| -> f64 {
        if ix < 0 || iy < 0 || ix >= w as isize || iy >= h as isize {
            0.0
        } else {
            f64::from(source.get(iy as usize, ix as usize, ch))
        }
    };
    let mut data = Vec::with_capacity(shape.len());
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = inverse(x as f64, y as f64);
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            for ch in 0..c {
                let value = sample(x0, y0, ch) * (1.0 - fx) * (1.0 - fy)
                    + sample(x0 + 1, y0, ch) * fx * (1.0 - fy)
                    + sample(x0, y0 + 1, ch) * (1.0 - fx) * fy
                    + sample(x0 + 1, y0 + 1, ch) * fx * fy;
                data.push(value.clamp(0.0, 1.0) as f32);
            }
        }
    }
    Image::from_clamped(shape, data)
}
