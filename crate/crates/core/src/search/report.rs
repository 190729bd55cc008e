use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Finding, FindingKind, SearchConfig, SearchEngine, SearchError};
use crate::dataset::SeedInput;
use crate::image::ImageError;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed report: {0}")]
    Json(#[from] serde_json::Error),
    #[error("finding {index} refers to unknown seed {seed_id:?}")]
    UnknownSeed { index: usize, seed_id: String },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FindingCounts {
    pub misclassification: usize,
    pub divergence: usize,
}

impl FindingCounts {
    pub fn tally(findings: &[Finding]) -> Self {
        let mut counts = Self::default();
        for f in findings {
            match f.kind {
                FindingKind::Misclassification => counts.misclassification += 1,
                FindingKind::Divergence => counts.divergence += 1,
            }
        }
        counts
    }

    pub fn total(&self) -> usize {
        self.misclassification + self.divergence
    }
}

/// Campaign aggregate. The embedded config is enough to rerun the campaign
/// on the same seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub config: SearchConfig,
    pub model_name: Option<String>,
    pub seed_count: usize,
    pub admitted_seeds: usize,
    pub evaluations: usize,
    pub baseline_ratio: f64,
    /// Baseline ratio followed by the ratio after every generation.
    pub trajectory: Vec<f64>,
    pub final_ratio: f64,
    pub counts: FindingCounts,
    pub findings: Vec<Finding>,
    pub duration_secs: f64,
    /// Caller-supplied description of the inputs (dataset, sample, model
    /// files) that, together with `config`, reruns the campaign.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub campaign: Option<serde_json::Value>,
}

impl TestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// JSON with the wall-clock duration zeroed; equal for reruns of the
    /// same campaign.
    pub fn canonical_json(&self) -> String {
        TestReport {
            duration_secs: 0.0,
            ..self.clone()
        }
        .to_json()
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ReportError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| ReportError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, ReportError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Checks the properties a report must have without rerunning anything:
    /// monotone trajectory ending at the final ratio, consistent counts,
    /// SSIM bounds, label predicates and unique finding keys.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.trajectory.first() != Some(&self.baseline_ratio) {
            return Err("trajectory does not start at the baseline".into());
        }
        if let Some(w) = self.trajectory.windows(2).position(|w| w[1] < w[0]) {
            return Err(format!("trajectory decreases after entry {w}"));
        }
        if self.trajectory.last() != Some(&self.final_ratio) {
            return Err("trajectory does not end at the final ratio".into());
        }
        if FindingCounts::tally(&self.findings) != self.counts {
            return Err("counts disagree with the findings list".into());
        }
        if !self.config.divergence_check && self.counts.divergence > 0 {
            return Err("divergence findings without divergence checking".into());
        }
        let mut keys = HashSet::new();
        for (i, f) in self.findings.iter().enumerate() {
            if f.ssim < self.config.ssim_threshold {
                return Err(format!("finding {i} has ssim {} below the threshold", f.ssim));
            }
            if f.model_label == f.reference_label {
                return Err(format!("finding {i} has no label disagreement"));
            }
            if !keys.insert(f.key()) {
                return Err(format!("finding {i} duplicates an earlier one"));
            }
        }
        Ok(())
    }

    /// Writes every finding's mutant as an 8-bit PNG into `dir`, returning
    /// the paths in finding order.
    pub fn export_pngs(
        &self,
        engine: &SearchEngine<'_>,
        seeds: &[SeedInput],
        dir: impl AsRef<Path>,
    ) -> Result<Vec<PathBuf>, ReportError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|source| ReportError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut written = Vec::with_capacity(self.findings.len());
        for (index, finding) in self.findings.iter().enumerate() {
            let seed = seeds
                .iter()
                .find(|s| s.id == finding.seed_id)
                .ok_or_else(|| ReportError::UnknownSeed {
                    index,
                    seed_id: finding.seed_id.clone(),
                })?;
            let replay = engine.replay(finding, seed)?;
            let name = format!(
                "{index:04}-{}-{}-{}-as-{}.png",
                sanitize(&finding.seed_id),
                finding.kind.as_str(),
                finding.mutant_path.as_str(),
                finding.model_label
            );
            let path = dir.join(name);
            replay.image.save_png(&path)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
