//! Moth-flame optimization.
//!
//! Flames are the best positions seen so far, sorted; moth `i` spirals
//! around flame `min(i, flames - 1)`. The number of flames shrinks
//! linearly from the population size to one.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Context, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfoParams {
    /// Logarithmic spiral shape constant.
    pub spiral: f64,
}

impl Default for MfoParams {
    fn default() -> Self {
        Self { spiral: 1.0 }
    }
}

impl MfoParams {
    /// Flames kept at iteration `t`.
    pub fn flame_count(&self, pop: usize, t: usize, max: usize) -> usize {
        if max == 0 {
            return 1;
        }
        let t = t.min(max) as f64;
        let n = pop as f64;
        ((n - t * (n - 1.0) / max as f64).round() as usize).max(1)
    }
}

#[derive(Debug)]
pub(crate) struct Mfo {
    params: MfoParams,
    moths: Vec<Vec<f64>>,
    flames: Vec<(Vec<f64>, f64)>,
}

impl Mfo {
    pub fn new(params: MfoParams) -> Self {
        Self {
            params,
            moths: Vec::new(),
            flames: Vec::new(),
        }
    }

    fn merge(&mut self, positions: &[Vec<f64>], fitness: &[f64]) {
        let keep = positions.len();
        self.flames
            .extend(positions.iter().cloned().zip(fitness.iter().copied()));
        // stable sort keeps older flames ahead on ties
        self.flames.sort_by(|a, b| b.1.total_cmp(&a.1));
        self.flames.truncate(keep);
    }
}

impl Strategy for Mfo {
    fn initialize(&mut self, positions: &[Vec<f64>], fitness: &[f64]) {
        self.moths = positions.to_vec();
        self.merge(positions, fitness);
    }

    fn propose(&mut self, ctx: &mut Context<'_>) -> Vec<Vec<f64>> {
        let n_flames = self
            .params
            .flame_count(self.moths.len(), ctx.iteration, ctx.max_iterations)
            .min(self.flames.len());
        // convergence constant falls linearly from -1 to -2
        let r = -1.0 - ctx.progress;
        self.moths
            .iter()
            .enumerate()
            .map(|(i, moth)| {
                let flame = &self.flames[i.min(n_flames - 1)].0;
                moth.iter()
                    .zip(flame)
                    .map(|(m, f)| {
                        let tau = (r - 1.0) * ctx.rng.random::<f64>() + 1.0;
                        (f - m).abs() * (self.params.spiral * tau).exp() * (2.0 * PI * tau).cos() + f
                    })
                    .collect()
            })
            .collect()
    }

    fn absorb(&mut self, _ctx: &mut Context<'_>, positions: &[Vec<f64>], fitness: &[f64]) {
        self.moths = positions.to_vec();
        self.merge(positions, fitness);
    }
}
