//! Whale optimization algorithm: shrinking encirclement, random search and
//! a logarithmic bubble-net spiral around the best whale.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{linear_schedule, Context, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WoaParams {
    pub a_start: f64,
    pub a_end: f64,
    /// Spiral shape constant.
    pub spiral: f64,
}

impl Default for WoaParams {
    fn default() -> Self {
        Self {
            a_start: 2.0,
            a_end: 0.0,
            spiral: 1.0,
        }
    }
}

impl WoaParams {
    pub fn control(&self, t: usize, max: usize) -> f64 {
        linear_schedule(self.a_start, self.a_end, t, max)
    }
}

#[derive(Debug)]
pub(crate) struct Woa {
    params: WoaParams,
    positions: Vec<Vec<f64>>,
}

impl Woa {
    pub fn new(params: WoaParams) -> Self {
        Self {
            params,
            positions: Vec::new(),
        }
    }
}

impl Strategy for Woa {
    fn initialize(&mut self, positions: &[Vec<f64>], _fitness: &[f64]) {
        self.positions = positions.to_vec();
    }

    fn propose(&mut self, ctx: &mut Context<'_>) -> Vec<Vec<f64>> {
        let a = self.params.control(ctx.iteration, ctx.max_iterations);
        let n = self.positions.len();
        let mut out = Vec::with_capacity(n);
        for x in &self.positions {
            let big_a = 2.0 * a * ctx.rng.random::<f64>() - a;
            let c = 2.0 * ctx.rng.random::<f64>();
            let p: f64 = ctx.rng.random();
            let l: f64 = ctx.rng.random_range(-1.0..1.0);
            let next = if p < 0.5 {
                let target = if big_a.abs() < 1.0 {
                    ctx.best.to_vec()
                } else {
                    self.positions[ctx.rng.random_range(0..n)].clone()
                };
                x.iter()
                    .zip(&target)
                    .map(|(xd, td)| td - big_a * (c * td - xd).abs())
                    .collect()
            } else {
                let factor = (self.params.spiral * l).exp() * (2.0 * PI * l).cos();
                x.iter()
                    .zip(ctx.best)
                    .map(|(xd, bd)| (bd - xd).abs() * factor + bd)
                    .collect()
            };
            out.push(next);
        }
        out
    }

    fn absorb(&mut self, _ctx: &mut Context<'_>, positions: &[Vec<f64>], _fitness: &[f64]) {
        self.positions = positions.to_vec();
    }
}
