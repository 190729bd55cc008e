//! Campaign configuration file (TOML).
//!
//! ```toml
//! output_dir = "out"
//! sample_size = 50
//! sampling_seed = 1
//!
//! [dataset]
//! format = "idx"
//! images = "mnist/images-idx3-ubyte"
//! labels = "mnist/labels-idx1-ubyte"
//!
//! [model]
//! manifest = "models/lenet-small.json"
//! weights = "models/lenet-small.bin"
//!
//! [search]
//! optimizer = "cs"
//! rng_seed = 7
//! divergence_check = true
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use covswarm_core::search::SearchConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// IDX image/label pair (MNIST layout).
    Idx { images: PathBuf, labels: PathBuf },
    /// Directory of PNGs plus a `filename,label` CSV manifest.
    Png { dir: PathBuf, labels: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFiles {
    pub manifest: PathBuf,
    pub weights: PathBuf,
    /// Pre-quantized twin; derived from the model when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantized_manifest: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantized_weights: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignFile {
    pub dataset: DatasetSource,
    /// Seeds drawn from the dataset; all of them when omitted.
    #[serde(default)]
    pub sample_size: Option<usize>,
    #[serde(default)]
    pub sampling_seed: u64,
    pub model: ModelFiles,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("covswarm-out")
}

impl CampaignFile {
    /// Reads a TOML campaign file, or the campaign embedded in a report
    /// written by an earlier run (`.json`).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut file: CampaignFile = if path.extension().is_some_and(|e| e == "json") {
            let report: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))?;
            let Some(campaign) = report.get("campaign") else {
                bail!("{} carries no campaign description", path.display());
            };
            serde_json::from_value(campaign.clone()).context("malformed campaign description")?
        } else {
            toml::from_str(&text).with_context(|| format!("malformed config {}", path.display()))?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        file.resolve(base);
        Ok(file)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset {
            DatasetSource::Idx { images, labels } => {
                fix(images);
                fix(labels);
            }
            DatasetSource::Png { dir, labels } => {
                fix(dir);
                fix(labels);
            }
        }
        fix(&mut self.model.manifest);
        fix(&mut self.model.weights);
        self.model.quantized_manifest.as_mut().map(fix);
        self.model.quantized_weights.as_mut().map(fix);
        fix(&mut self.output_dir);
    }

    /// Referenced input files must exist before anything runs.
    pub fn check_files(&self) -> Result<()> {
        let mut files = vec![&self.model.manifest, &self.model.weights];
        match &self.dataset {
            DatasetSource::Idx { images, labels } => files.extend([images, labels]),
            DatasetSource::Png { dir, labels } => files.extend([dir, labels]),
        }
        files.extend(self.model.quantized_manifest.iter());
        files.extend(self.model.quantized_weights.iter());
        if let Some(missing) = files.into_iter().find(|p| !p.exists()) {
            bail!("referenced file {} does not exist", missing.display());
        }
        if self.model.quantized_manifest.is_some() != self.model.quantized_weights.is_some() {
            bail!("quantized_manifest and quantized_weights must be given together");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves() {
        let text = r#"
            sample_size = 5
            [dataset]
            format = "png"
            dir = "imgs"
            labels = "imgs/labels.csv"
            [model]
            manifest = "/abs/m.json"
            weights = "w.bin"
            [search]
            optimizer = "gwo"
            pop_size = 4
        "#;
        let mut file: CampaignFile = toml::from_str(text).unwrap();
        file.resolve(Path::new("/cfg"));
        assert_eq!(
            file.dataset,
            DatasetSource::Png {
                dir: "/cfg/imgs".into(),
                labels: "/cfg/imgs/labels.csv".into()
            }
        );
        assert_eq!(file.model.manifest, PathBuf::from("/abs/m.json"));
        assert_eq!(file.model.weights, PathBuf::from("/cfg/w.bin"));
        assert_eq!(file.output_dir, PathBuf::from("/cfg/covswarm-out"));
        assert_eq!(file.search.pop_size, 4);
        assert_eq!(file.search.max_iterations, 10);
        assert_eq!(file.search.optimizer.name(), "gwo");
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = r#"
            bogus = 1
            [dataset]
            format = "idx"
            images = "a"
            labels = "b"
            [model]
            manifest = "m"
            weights = "w"
        "#;
        assert!(toml::from_str::<CampaignFile>(text).is_err());
    }
}
