//! Grey wolf optimizer.
//!
//! Wolves move toward the three best positions found so far (alpha, beta,
//! delta). The control parameter `a` decreases linearly from 2 to 0,
//! shifting the pack from encircling exploration to attacking the prey.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{linear_schedule, Context, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GwoParams {
    pub a_start: f64,
    pub a_end: f64,
}

impl Default for GwoParams {
    fn default() -> Self {
        Self { a_start: 2.0, a_end: 0.0 }
    }
}

impl GwoParams {
    pub fn control(&self, t: usize, max: usize) -> f64 {
        linear_schedule(self.a_start, self.a_end, t, max)
    }
}

/// Position update of one wolf given the three leaders and control `a`.
pub fn gwo_move<R: Rng + ?Sized>(x: &[f64], leaders: [&[f64]; 3], a: f64, rng: &mut R) -> Vec<f64> {
    (0..x.len())
        .map(|d| {
            let sum: f64 = leaders
                .iter()
                .map(|leader| {
                    let big_a = 2.0 * a * rng.random::<f64>() - a;
                    let c = 2.0 * rng.random::<f64>();
                    let dist = (c * leader[d] - x[d]).abs();
                    leader[d] - big_a * dist
                })
                .sum();
            sum / 3.0
        })
        .collect()
}

#[derive(Debug)]
pub(crate) struct Gwo {
    params: GwoParams,
    positions: Vec<Vec<f64>>,
    /// Best three evaluations so far, best first.
    leaders: Vec<(Vec<f64>, f64)>,
}

impl Gwo {
    pub fn new(params: GwoParams) -> Self {
        Self {
            params,
            positions: Vec::new(),
            leaders: Vec::with_capacity(3),
        }
    }

    fn consider(&mut self, positions: &[Vec<f64>], fitness: &[f64]) {
        for (p, &f) in positions.iter().zip(fitness) {
            let slot = self.leaders.iter().position(|(_, lf)| f > *lf).unwrap_or(self.leaders.len());
            if slot < 3 {
                self.leaders.insert(slot, (p.clone(), f));
                self.leaders.truncate(3);
            }
        }
    }
}

impl Strategy for Gwo {
    fn initialize(&mut self, positions: &[Vec<f64>], fitness: &[f64]) {
        self.positions = positions.to_vec();
        self.consider(positions, fitness);
    }

    fn propose(&mut self, ctx: &mut Context<'_>) -> Vec<Vec<f64>> {
        let a = self.params.control(ctx.iteration, ctx.max_iterations);
        let pick = |k: usize| self.leaders[k.min(self.leaders.len() - 1)].0.as_slice();
        let leaders = [pick(0), pick(1), pick(2)];
        self.positions
            .iter()
            .map(|x| gwo_move(x, leaders, a, ctx.rng))
            .collect()
    }

    fn absorb(&mut self, _ctx: &mut Context<'_>, positions: &[Vec<f64>], fitness: &[f64]) {
        self.positions = positions.to_vec();
        self.consider(positions, fitness);
    }
}
