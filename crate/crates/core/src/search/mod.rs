//! Test-generation campaigns.
//!
//! A campaign first runs every seed input unmodified and commits its
//! coverage (the baseline). Then, seed by seed, a swarm evolves transform
//! vectors for a fixed number of generations. Each candidate vector is
//! expanded into five mutants; the SSIM survivors are run through the model
//! (and optionally its half-precision twin), scored by new coverage, and
//! checked for label changes. Coverage is committed at generation
//! boundaries, so every candidate of a generation sees the same snapshot.
//!
//! All randomness is derived from `rng_seed`: the swarm of seed `i` gets
//! its own stream, and each candidate's noise gets a substream keyed by
//! (seed index, generation, candidate index). The substream key is stored
//! in every finding, which makes findings replayable without pixel data.

mod report;

use std::collections::HashSet;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coverage::{FitnessBreakdown, GlobalCoverageMap, NeuronLayout, NeuronSet};
use crate::dataset::SeedInput;
use crate::image::Image;
use crate::model::{argmax, ClassLabel, Model, ModelError};
use crate::optimizer::{OptimizerError, OptimizerKind, OptimizerParams, SearchBox, Swarm, SwarmConfig};
use crate::transform::{Bounds, MutantPath, TransformError, TransformSettings, TransformVector, Transformer};

pub use report::{FindingCounts, ReportError, TestReport};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("campaign needs at least one seed input")]
    NoSeeds,
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("divergence checking needs a quantized model")]
    MissingQuantizedModel,
    #[error("model and quantized model have different layouts")]
    ModelMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Weight of local new coverage in the fitness.
    pub alpha: f64,
    /// Weight of global new coverage in the fitness.
    pub beta: f64,
    pub pop_size: usize,
    /// Generations per seed input.
    pub max_iterations: usize,
    pub ssim_threshold: f64,
    pub activation_threshold: f64,
    pub optimizer: OptimizerKind,
    pub rng_seed: u64,
    pub divergence_check: bool,
    /// Continue one swarm across all seeds instead of starting a fresh one
    /// per seed.
    pub persistent_swarm: bool,
    pub bounds: Bounds,
    pub transform: TransformSettings,
    pub optimizer_params: OptimizerParams,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 1.0,
            pop_size: 10,
            max_iterations: 10,
            ssim_threshold: 0.5,
            activation_threshold: 0.25,
            optimizer: OptimizerKind::Pso,
            rng_seed: 0,
            divergence_check: false,
            persistent_swarm: false,
            bounds: Bounds::default(),
            transform: TransformSettings::default(),
            optimizer_params: OptimizerParams::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |msg: String| Err(SearchError::Config(msg));
        if !(self.alpha.is_finite() && self.beta.is_finite()) {
            return bad(format!("alpha and beta must be finite, got {} and {}", self.alpha, self.beta));
        }
        if !(0.0..=1.0).contains(&self.ssim_threshold) {
            return bad(format!("ssim_threshold {} outside [0, 1]", self.ssim_threshold));
        }
        if !(0.0..=1.0).contains(&self.activation_threshold) {
            return bad(format!("activation_threshold {} outside [0, 1]", self.activation_threshold));
        }
        if self.pop_size < 2 {
            return bad(format!("pop_size must be at least 2, got {}", self.pop_size));
        }
        if self.transform.ssim_window == 0 {
            return bad("ssim_window must be positive".into());
        }
        self.bounds.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    /// The model changed its answer away from the ground-truth label.
    Misclassification,
    /// The model and its quantized twin disagree.
    Divergence,
}

impl FindingKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FindingKind::Misclassification => "misclassification",
            FindingKind::Divergence => "divergence",
        }
    }
}

/// A stored failed test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub seed_id: String,
    pub transform_vector: TransformVector,
    pub mutant_path: MutantPath,
    /// Label the model under test assigned to the mutant.
    pub model_label: ClassLabel,
    /// Ground truth for misclassifications, the quantized model's label
    /// for divergences.
    pub reference_label: ClassLabel,
    pub ssim: f64,
    /// Seed of the noise stream used when the mutant was generated.
    pub noise_stream: u64,
}

impl Finding {
    fn key(&self) -> (String, FindingKind, MutantPath, ClassLabel) {
        (self.seed_id.clone(), self.kind, self.mutant_path, self.model_label)
    }
}

/// Labels on which a model and its quantized twin disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Divergence {
    pub model_label: ClassLabel,
    pub quantized_label: ClassLabel,
}

/// Present iff the two models predict different labels for `mutant`.
pub fn detect_divergence(model: &Model, qmodel: &Model, mutant: &Image) -> Result<Option<Divergence>, ModelError> {
    let model_label = model.predict(mutant)?;
    let quantized_label = qmodel.predict(mutant)?;
    Ok((model_label != quantized_label).then_some(Divergence {
        model_label,
        quantized_label,
    }))
}

/// A seed input together with what the unmodified image did.
#[derive(Debug, Clone)]
pub struct PreparedSeed<'a> {
    pub input: &'a SeedInput,
    pub covered: NeuronSet,
    pub prediction: ClassLabel,
}

impl PreparedSeed<'_> {
    /// Seeds the model already gets wrong are kept out of the
    /// misclassification search.
    pub fn admitted(&self) -> bool {
        self.prediction == self.input.label
    }
}

/// Result of evaluating one transform vector on one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Best fitness over the surviving mutants, 0 without survivors.
    pub fitness: f64,
    pub findings: Vec<Finding>,
    /// Union of the survivors' activated sets.
    pub covered: NeuronSet,
    pub survivors: usize,
}

/// Coverage and findings produced by one seed's search.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedOutcome {
    pub findings: Vec<Finding>,
    /// Coverage ratio after each generation.
    pub trajectory: Vec<f64>,
    pub evaluations: usize,
}

/// What replaying a finding produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub image: Image,
    pub ssim: f64,
    pub model_label: ClassLabel,
    pub quantized_label: Option<ClassLabel>,
}

impl Replay {
    /// Whether the replay reproduces the finding's labels and SSIM bound.
    pub fn confirms(&self, finding: &Finding, ssim_threshold: f64) -> bool {
        let labels = match finding.kind {
            FindingKind::Misclassification => self.model_label == finding.model_label,
            FindingKind::Divergence => {
                self.model_label == finding.model_label && self.quantized_label == Some(finding.reference_label)
            }
        };
        labels && self.ssim >= ssim_threshold
    }
}

/// Model, optional quantized twin and configuration of a campaign.
#[derive(Debug, Clone)]
pub struct SearchEngine<'m> {
    model: &'m Model,
    qmodel: Option<&'m Model>,
    config: SearchConfig,
    layout: NeuronLayout,
    transformer: Transformer,
}

impl<'m> SearchEngine<'m> {
    pub fn new(model: &'m Model, qmodel: Option<&'m Model>, config: SearchConfig) -> Result<Self, SearchError> {
        config.validate()?;
        if config.divergence_check && qmodel.is_none() {
            return Err(SearchError::MissingQuantizedModel);
        }
        if let Some(q) = qmodel {
            if q.layer_widths() != model.layer_widths() || q.input_shape() != model.input_shape() {
                return Err(SearchError::ModelMismatch);
            }
        }
        Ok(Self {
            model,
            qmodel,
            layout: NeuronLayout::for_model(model),
            transformer: Transformer::new(config.bounds, config.transform)?,
            config,
        })
    }

    pub fn config(&self) -> &SearchConfig {
        &self.config
    }

    pub fn layout(&self) -> &NeuronLayout {
        &self.layout
    }

    pub fn transformer(&self) -> &Transformer {
        &self.transformer
    }

    fn divergence_model(&self) -> Option<&'m Model> {
        self.qmodel.filter(|_| self.config.divergence_check)
    }

    /// Neurons `image` activates, with the model's label for it.
    pub fn activated(&self, image: &Image) -> Result<(NeuronSet, ClassLabel), ModelError> {
        let pass = self.model.forward(image)?;
        let set = self.layout.activated_set(&pass.profile, self.config.activation_threshold);
        Ok((set, argmax(&pass.logits)))
    }

    pub fn prepare<'s>(&self, seed: &'s SeedInput) -> Result<PreparedSeed<'s>, ModelError> {
        let (covered, prediction) = self.activated(&seed.image)?;
        Ok(PreparedSeed {
            input: seed,
            covered,
            prediction,
        })
    }

    /// Expands `v`, filters by SSIM and scores each survivor against the
    /// seed's own coverage and the `global` snapshot.
    pub fn evaluate_candidate(
        &self,
        v: &TransformVector,
        seed: &PreparedSeed<'_>,
        global: &GlobalCoverageMap,
        noise_stream: u64,
    ) -> Result<Evaluation, SearchError> {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_stream);
        let source = &seed.input.image;
        let batch = self.transformer.expand(source, v, &mut rng)?;
        let survivors = self.transformer.filter_valid(source, &batch, self.config.ssim_threshold);

        let mut out = Evaluation {
            fitness: 0.0,
            findings: Vec::new(),
            covered: self.layout.empty_set(),
            survivors: survivors.len(),
        };
        let mut best: Option<f64> = None;
        for survivor in &survivors {
            let (set, label) = self.activated(&survivor.image)?;
            let score = FitnessBreakdown::score(&set, &seed.covered, global, self.config.alpha, self.config.beta);
            best = Some(best.map_or(score.value, |b| b.max(score.value)));
            out.covered.union_with(&set);

            let finding = |kind, reference_label| Finding {
                kind,
                seed_id: seed.input.id.clone(),
                transform_vector: *v,
                mutant_path: survivor.path,
                model_label: label,
                reference_label,
                ssim: survivor.ssim,
                noise_stream,
            };
            if seed.admitted() && label != seed.input.label {
                out.findings.push(finding(FindingKind::Misclassification, seed.input.label));
            }
            if let Some(q) = self.divergence_model() {
                let quantized = q.predict(&survivor.image)?;
                if quantized != label {
                    out.findings.push(finding(FindingKind::Divergence, quantized));
                }
            }
        }
        out.fitness = best.unwrap_or(0.0);
        Ok(out)
    }

    fn swarm(&self, seed_index: usize, horizon: usize) -> Result<Swarm, SearchError> {
        let bounds = &self.config.bounds;
        let search_box = SearchBox::new(bounds.low.to_array().to_vec(), bounds.high.to_array().to_vec())?;
        Ok(Swarm::new(
            self.config.optimizer,
            search_box,
            SwarmConfig {
                pop_size: self.config.pop_size,
                max_iterations: horizon,
                seed: mix(&[self.config.rng_seed, SWARM_DOMAIN, seed_index as u64]),
                params: self.config.optimizer_params,
            },
        )?)
    }

    /// Runs a fresh swarm on one seed, committing coverage into `global`.
    pub fn run_seed(
        &self,
        seed_index: usize,
        seed: &PreparedSeed<'_>,
        global: &mut GlobalCoverageMap,
    ) -> Result<SeedOutcome, SearchError> {
        let mut swarm = self.swarm(seed_index, self.config.max_iterations)?;
        self.run_seed_with(seed_index, seed, global, &mut swarm)
    }

    fn run_seed_with(
        &self,
        seed_index: usize,
        seed: &PreparedSeed<'_>,
        global: &mut GlobalCoverageMap,
        swarm: &mut Swarm,
    ) -> Result<SeedOutcome, SearchError> {
        let mut outcome = SeedOutcome {
            findings: Vec::new(),
            trajectory: Vec::with_capacity(self.config.max_iterations),
            evaluations: 0,
        };
        let mut seen = HashSet::new();
        for generation in 0..self.config.max_iterations {
            let positions = swarm.ask()?;
            let snapshot = &*global;
            let evaluations: Vec<Evaluation> = positions
                .par_iter()
                .enumerate()
                .map(|(i, p)| {
                    let stream = noise_stream(self.config.rng_seed, seed_index, generation, i);
                    self.evaluate_candidate(&TransformVector::from_slice(p), seed, snapshot, stream)
                })
                .collect::<Result<_, _>>()?;
            let fitness: Vec<f64> = evaluations.iter().map(|e| e.fitness).collect();
            swarm.tell(&fitness)?;
            for evaluation in evaluations {
                global.commit(&evaluation.covered);
                for finding in evaluation.findings {
                    if seen.insert(finding.key()) {
                        outcome.findings.push(finding);
                    }
                }
            }
            outcome.evaluations += positions.len();
            outcome.trajectory.push(global.coverage_ratio());
        }
        Ok(outcome)
    }

    /// Baseline commit of every seed, then the per-seed search in order.
    pub fn run_campaign(&self, seeds: &[SeedInput]) -> Result<TestReport, SearchError> {
        if seeds.is_empty() {
            return Err(SearchError::NoSeeds);
        }
        let started = Instant::now();
        let prepared: Vec<PreparedSeed<'_>> = seeds
            .par_iter()
            .map(|s| self.prepare(s))
            .collect::<Result<_, _>>()?;

        let mut global = GlobalCoverageMap::new(&self.layout);
        for seed in &prepared {
            global.commit(&seed.covered);
        }
        let baseline_ratio = global.coverage_ratio();

        let mut persistent = if self.config.persistent_swarm {
            Some(self.swarm(0, self.config.max_iterations * seeds.len())?)
        } else {
            None
        };
        let mut trajectory = vec![baseline_ratio];
        let mut findings = Vec::new();
        let mut evaluations = 0;
        let mut admitted = 0;
        for (index, seed) in prepared.iter().enumerate() {
            admitted += usize::from(seed.admitted());
            if !seed.admitted() && self.divergence_model().is_none() {
                continue;
            }
            let outcome = match persistent.as_mut() {
                Some(swarm) => self.run_seed_with(index, seed, &mut global, swarm)?,
                None => self.run_seed(index, seed, &mut global)?,
            };
            trajectory.extend(outcome.trajectory);
            findings.extend(outcome.findings);
            evaluations += outcome.evaluations;
        }

        Ok(TestReport {
            config: self.config,
            model_name: self.model.manifest().name,
            seed_count: seeds.len(),
            admitted_seeds: admitted,
            evaluations,
            baseline_ratio,
            final_ratio: global.coverage_ratio(),
            trajectory,
            counts: FindingCounts::tally(&findings),
            findings,
            duration_secs: started.elapsed().as_secs_f64(),
            campaign: None,
        })
    }

    /// Regenerates a finding's mutant from its seed and noise stream.
    pub fn replay(&self, finding: &Finding, seed: &SeedInput) -> Result<Replay, SearchError> {
        let mut rng = ChaCha8Rng::seed_from_u64(finding.noise_stream);
        let batch = self.transformer.expand(&seed.image, &finding.transform_vector, &mut rng)?;
        let image = batch.get(finding.mutant_path).clone();
        let ssim = crate::transform::ssim_with_window(&seed.image, &image, self.config.transform.ssim_window)?;
        let model_label = self.model.predict(&image)?;
        let quantized_label = self.qmodel.map(|q| q.predict(&image)).transpose()?;
        Ok(Replay {
            image,
            ssim,
            model_label,
            quantized_label,
        })
    }
}

const SWARM_DOMAIN: u64 = 0x5357_4152_4d00_0001;
const NOISE_DOMAIN: u64 = 0x4e4f_4953_4500_0002;

/// Noise substream of one candidate evaluation.
pub fn noise_stream(rng_seed: u64, seed_index: usize, generation: usize, candidate: usize) -> u64 {
    mix(&[rng_seed, NOISE_DOMAIN, seed_index as u64, generation as u64, candidate as u64])
}

/// Folds words through the splitmix64 finalizer.
fn mix(words: &[u64]) -> u64 {
    words.iter().fold(0x9e37_79b9_7f4a_7c15, |acc, &w| {
        let mut z = (acc ^ w).wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    })
}
