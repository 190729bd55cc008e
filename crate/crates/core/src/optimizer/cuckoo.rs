//! Cuckoo search.
//!
//! Generations alternate between two phases: a Lévy-flight phase where
//! every nest lays a trial egg at a heavy-tailed random offset, and a
//! discovery phase where a fraction `pa` of components are rebuilt from the
//! difference of two random nests. Both phases replace a nest only when the
//! trial is strictly better.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::{Context, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CuckooParams {
    /// Probability that a component is discovered and rebuilt.
    pub discovery_rate: f64,
    pub levy_exponent: f64,
    /// Lévy step size as a fraction of each dimension's range.
    pub step_scale: f64,
}

impl Default for CuckooParams {
    fn default() -> Self {
        Self {
            discovery_rate: 0.25,
            levy_exponent: 1.5,
            step_scale: 0.01,
        }
    }
}

/// One Lévy-distributed step drawn with Mantegna's algorithm.
pub fn levy_step<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    let sigma_u = (gamma(1.0 + beta) * (PI * beta / 2.0).sin()
        / (gamma((1.0 + beta) / 2.0) * beta * 2f64.powf((beta - 1.0) / 2.0)))
    .powf(1.0 / beta);
    let u: f64 = rng.sample::<f64, _>(StandardNormal) * sigma_u;
    let v: f64 = rng.sample(StandardNormal);
    u / v.abs().powf(1.0 / beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Levy,
    Discovery,
}

#[derive(Debug)]
pub(crate) struct Cuckoo {
    params: CuckooParams,
    nests: Vec<Vec<f64>>,
    fitness: Vec<f64>,
    phase: Phase,
}

impl Cuckoo {
    pub fn new(params: CuckooParams) -> Self {
        Self {
            params,
            nests: Vec::new(),
            fitness: Vec::new(),
            phase: Phase::Levy,
        }
    }
}

impl Strategy for Cuckoo {
    fn initialize(&mut self, positions: &[Vec<f64>], fitness: &[f64]) {
        self.nests = positions.to_vec();
        self.fitness = fitness.to_vec();
    }

    fn propose(&mut self, ctx: &mut Context<'_>) -> Vec<Vec<f64>> {
        match self.phase {
            Phase::Levy => self
                .nests
                .iter()
                .map(|nest| {
                    nest.iter()
                        .enumerate()
                        .map(|(d, x)| {
                            x + self.params.step_scale
                                * ctx.bounds.range(d)
                                * levy_step(self.params.levy_exponent, ctx.rng)
                        })
                        .collect()
                })
                .collect(),
            Phase::Discovery => {
                let n = self.nests.len();
                let mut first: Vec<usize> = (0..n).collect();
                let mut second: Vec<usize> = (0..n).collect();
                first.shuffle(ctx.rng);
                second.shuffle(ctx.rng);
                (0..n)
                    .map(|i| {
                        let step: f64 = ctx.rng.random();
                        let (a, b) = (&self.nests[first[i]], &self.nests[second[i]]);
                        self.nests[i]
                            .iter()
                            .enumerate()
                            .map(|(d, x)| {
                                if ctx.rng.random::<f64>() < self.params.discovery_rate {
                                    x + step * (a[d] - b[d])
                                } else {
                                    *x
                                }
                            })
                            .collect()
                    })
                    .collect()
            }
        }
    }

    fn absorb(&mut self, _ctx: &mut Context<'_>, positions: &[Vec<f64>], fitness: &[f64]) {
        for (i, (p, &f)) in positions.iter().zip(fitness).enumerate() {
            if f > self.fitness[i] {
                self.nests[i] = p.clone();
                self.fitness[i] = f;
            }
        }
        self.phase = match self.phase {
            Phase::Levy => Phase::Discovery,
            Phase::Discovery => Phase::Levy,
        };
    }
}
