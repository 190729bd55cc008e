//! Seed-input ingestion: IDX pairs (MNIST layout) and PNG directories with
//! a `filename,label` manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::image::{Image, ImageError};
use crate::model::ClassLabel;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: bad magic number {found:#010x}, expected {expected:#010x}")]
    BadMagic { path: PathBuf, expected: u32, found: u32 },
    #[error("{path}: truncated, needs {expected} bytes but has {actual}")]
    Truncated { path: PathBuf, expected: usize, actual: usize },
    #[error("image file holds {images} items but label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("label manifest: {0}")]
    Manifest(#[from] csv::Error),
    #[error("{file}: {source}")]
    Image { file: String, source: ImageError },
    #[error("requested {requested} seeds from a dataset of {available}")]
    SampleTooLarge { requested: usize, available: usize },
}

/// An original labeled input a campaign mutates.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedInput {
    pub id: String,
    pub image: Image,
    pub label: ClassLabel,
}

fn read(path: &Path) -> Result<Vec<u8>, DatasetError> {
    fs::read(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn be_u32(bytes: &[u8], at: usize, path: &Path) -> Result<u32, DatasetError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| DatasetError::Truncated {
            path: path.to_path_buf(),
            expected: at + 4,
            actual: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<(), DatasetError> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(DatasetError::BadMagic {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(())
}

fn body<'a>(bytes: &'a [u8], header: usize, len: usize, path: &Path) -> Result<&'a [u8], DatasetError> {
    bytes.get(header..header + len).ok_or_else(|| DatasetError::Truncated {
        path: path.to_path_buf(),
        expected: header + len,
        actual: bytes.len(),
    })
}

/// Reads an IDX image/label pair. Pixel bytes are scaled by 1/255 into
/// single-channel images; seeds are named `idx-<index>`.
pub fn ingest_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Vec<SeedInput>, DatasetError> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());
    let images = read(images_path)?;
    let labels = read(labels_path)?;
    check_magic(&images, IDX_IMAGES_MAGIC, images_path)?;
    check_magic(&labels, IDX_LABELS_MAGIC, labels_path)?;

    let count = be_u32(&images, 4, images_path)? as usize;
    let rows = be_u32(&images, 8, images_path)? as usize;
    let cols = be_u32(&images, 12, images_path)? as usize;
    let label_count = be_u32(&labels, 4, labels_path)? as usize;
    if count != label_count {
        return Err(DatasetError::CountMismatch {
            images: count,
            labels: label_count,
        });
    }
    let pixels = body(&images, 16, count * rows * cols, images_path)?;
    let label_bytes = body(&labels, 8, count, labels_path)?;

    pixels
        .chunks_exact((rows * cols).max(1))
        .zip(label_bytes)
        .enumerate()
        .map(|(i, (chunk, &label))| {
            let id = format!("idx-{i}");
            let image = Image::from_bytes(rows, cols, 1, chunk).map_err(|source| DatasetError::Image {
                file: id.clone(),
                source,
            })?;
            Ok(SeedInput {
                id,
                image,
                label: ClassLabel(label as usize),
            })
        })
        .collect()
}

/// Reads PNG files listed in a `filename,label` CSV manifest (with header)
/// relative to `dir`. Seeds are named after their file.
pub fn ingest_png_dir(dir: impl AsRef<Path>, manifest: impl AsRef<Path>) -> Result<Vec<SeedInput>, DatasetError> {
    let dir = dir.as_ref();
    let mut reader = csv::Reader::from_path(manifest.as_ref())?;
    let mut seeds = Vec::new();
    for record in reader.deserialize() {
        let (file, label): (String, usize) = record?;
        let image = Image::load_png(dir.join(&file)).map_err(|source| DatasetError::Image {
            file: file.clone(),
            source,
        })?;
        seeds.push(SeedInput {
            id: file,
            image,
            label: ClassLabel(label),
        });
    }
    Ok(seeds)
}

/// Draws `size` distinct seeds without replacement.
pub fn sample_seeds(seeds: &[SeedInput], size: usize, sampling_seed: u64) -> Result<Vec<SeedInput>, DatasetError> {
    if size > seeds.len() {
        return Err(DatasetError::SampleTooLarge {
            requested: size,
            available: seeds.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling_seed);
    Ok(index::sample(&mut rng, seeds.len(), size)
        .into_iter()
        .map(|i| seeds[i].clone())
        .collect())
}

/// Encodes seeds back into an IDX pair (single-channel, equal shapes).
pub fn write_idx(seeds: &[SeedInput], images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> std::io::Result<()> {
    let (rows, cols) = seeds
        .first()
        .map(|s| (s.image.height(), s.image.width()))
        .unwrap_or((0, 0));
    let mut images = Vec::with_capacity(16 + seeds.len() * rows * cols);
    for v in [IDX_IMAGES_MAGIC, seeds.len() as u32, rows as u32, cols as u32] {
        images.extend_from_slice(&v.to_be_bytes());
    }
    let mut labels = Vec::with_capacity(8 + seeds.len());
    labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(seeds.len() as u32).to_be_bytes());
    for seed in seeds {
        images.extend(seed.image.to_bytes());
        labels.push(seed.label.0 as u8);
    }
    fs::write(images_path, images)?;
    fs::write(labels_path, labels)
}
