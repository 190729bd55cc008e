//! Neuron-coverage bookkeeping.
//!
//! A neuron is covered by an input when its activation, min-max scaled
//! within its own layer for that single input, strictly exceeds the
//! activation threshold. Mutants are scored by how many neurons they cover
//! that their seed did not (local) and that no earlier input of the
//! campaign did (global).

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::model::{ActivationProfile, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NeuronId {
    pub layer: usize,
    pub unit: usize,
}

/// Maps [`NeuronId`]s of the coverage-eligible layers onto dense indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeuronLayout {
    /// Recorded-layer width, `None` for layers excluded from coverage.
    widths: Vec<Option<usize>>,
    offsets: Vec<usize>,
    total: usize,
}

impl NeuronLayout {
    pub fn new(widths: &[usize], counted: &[bool]) -> Self {
        assert_eq!(widths.len(), counted.len());
        let mut offsets = Vec::with_capacity(widths.len());
        let mut total = 0;
        let widths = widths
            .iter()
            .zip(counted)
            .map(|(&w, &c)| {
                offsets.push(total);
                if c {
                    total += w;
                    Some(w)
                } else {
                    None
                }
            })
            .collect();
        Self { widths, offsets, total }
    }

    pub fn for_model(model: &Model) -> Self {
        Self::new(&model.layer_widths(), &model.coverage_mask())
    }

    /// Number of coverage neurons.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn index_of(&self, id: NeuronId) -> Option<usize> {
        match self.widths.get(id.layer)? {
            Some(w) if id.unit < *w => Some(self.offsets[id.layer] + id.unit),
            _ => None,
        }
    }

    pub fn id_of(&self, index: usize) -> Option<NeuronId> {
        if index >= self.total {
            return None;
        }
        self.widths.iter().enumerate().find_map(|(layer, w)| {
            let w = (*w)?;
            let start = self.offsets[layer];
            (index >= start && index < start + w).then_some(NeuronId {
                layer,
                unit: index - start,
            })
        })
    }

    pub fn empty_set(&self) -> NeuronSet {
        NeuronSet(FixedBitSet::with_capacity(self.total))
    }

    /// Neurons whose per-layer min-max scaled activation is strictly above
    /// `threshold`. Layers with constant activation cover nothing.
    pub fn activated_set(&self, profile: &ActivationProfile, threshold: f64) -> NeuronSet {
        debug_assert_eq!(profile.per_layer.len(), self.widths.len());
        let mut set = self.empty_set();
        for (layer, values) in profile.per_layer.iter().enumerate() {
            if self.widths[layer].is_none() {
                continue;
            }
            let (min, max) = values
                .iter()
                .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            if !(max > min) {
                continue;
            }
            let span = f64::from(max) - f64::from(min);
            let offset = self.offsets[layer];
            for (unit, &v) in values.iter().enumerate() {
                if (f64::from(v) - f64::from(min)) / span > threshold {
                    set.0.insert(offset + unit);
                }
            }
        }
        set
    }
}

/// Set of covered neurons, indexed through a [`NeuronLayout`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NeuronSet(FixedBitSet);

impl NeuronSet {
    pub fn from_indices(total: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut bits = FixedBitSet::with_capacity(total);
        bits.extend(indices);
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.contains(index)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.ones()
    }

    /// `|self \ other|`
    pub fn count_not_in(&self, other: &NeuronSet) -> usize {
        self.0.difference_count(&other.0)
    }

    pub fn union_with(&mut self, other: &NeuronSet) {
        self.0.union_with(&other.0);
    }

    pub fn is_subset(&self, other: &NeuronSet) -> bool {
        self.0.is_subset(&other.0)
    }
}

/// Local new coverage: neurons the mutant covers that its seed did not.
pub fn nlnc(mutated: &NeuronSet, original: &NeuronSet) -> usize {
    mutated.count_not_in(original)
}

/// Global new coverage: neurons the mutant covers that no committed input did.
pub fn ngnc(mutated: &NeuronSet, global: &GlobalCoverageMap) -> usize {
    mutated.count_not_in(&global.covered)
}

/// `alpha * nlnc + beta * ngnc`.
pub fn fitness(nlnc: usize, ngnc: usize, alpha: f64, beta: f64) -> f64 {
    alpha * nlnc as f64 + beta * ngnc as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessBreakdown {
    pub nlnc: usize,
    pub ngnc: usize,
    pub value: f64,
}

impl FitnessBreakdown {
    pub fn score(mutated: &NeuronSet, original: &NeuronSet, global: &GlobalCoverageMap, alpha: f64, beta: f64) -> Self {
        let nlnc = nlnc(mutated, original);
        let ngnc = ngnc(mutated, global);
        Self {
            nlnc,
            ngnc,
            value: fitness(nlnc, ngnc, alpha, beta),
        }
    }
}

/// Campaign-wide set of covered neurons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalCoverageMap {
    covered: NeuronSet,
    total: usize,
}

impl GlobalCoverageMap {
    pub fn new(layout: &NeuronLayout) -> Self {
        Self {
            covered: layout.empty_set(),
            total: layout.total(),
        }
    }

    pub fn covered(&self) -> &NeuronSet {
        &self.covered
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn commit(&mut self, set: &NeuronSet) {
        self.covered.union_with(set);
    }

    pub fn coverage_ratio(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.covered.len() as f64 / self.total as f64
    }
}
