//! Particle swarm optimization with a linearly decreasing inertia weight.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{linear_schedule, Context, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoParams {
    pub inertia_start: f64,
    pub inertia_end: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity limit as a fraction of each dimension's range.
    pub velocity_clamp: f64,
}

impl Default for PsoParams {
    fn default() -> Self {
        Self {
            inertia_start: 0.9,
            inertia_end: 0.4,
            cognitive: 2.0,
            social: 2.0,
            velocity_clamp: 0.2,
        }
    }
}

impl PsoParams {
    pub fn inertia(&self, t: usize, max: usize) -> f64 {
        linear_schedule(self.inertia_start, self.inertia_end, t, max)
    }
}

#[derive(Debug)]
pub(crate) struct Pso {
    params: PsoParams,
    positions: Vec<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
    personal: Vec<(Vec<f64>, f64)>,
}

impl Pso {
    pub fn new(params: PsoParams) -> Self {
        Self {
            params,
            positions: Vec::new(),
            velocities: Vec::new(),
            personal: Vec::new(),
        }
    }
}

impl Strategy for Pso {
    fn initialize(&mut self, positions: &[Vec<f64>], fitness: &[f64]) {
        self.positions = positions.to_vec();
        self.velocities = positions.iter().map(|p| vec![0.0; p.len()]).collect();
        self.personal = positions.iter().cloned().zip(fitness.iter().copied()).collect();
    }

    fn propose(&mut self, ctx: &mut Context<'_>) -> Vec<Vec<f64>> {
        let w = self.params.inertia(ctx.iteration, ctx.max_iterations);
        let (c1, c2) = (self.params.cognitive, self.params.social);
        let mut out = Vec::with_capacity(self.positions.len());
        for ((x, v), (pbest, _)) in self.positions.iter().zip(self.velocities.iter_mut()).zip(&self.personal) {
            let next = (0..x.len())
                .map(|d| {
                    let (r1, r2): (f64, f64) = (ctx.rng.random(), ctx.rng.random());
                    let limit = self.params.velocity_clamp * ctx.bounds.range(d);
                    v[d] = (w * v[d] + c1 * r1 * (pbest[d] - x[d]) + c2 * r2 * (ctx.best[d] - x[d]))
                        .clamp(-limit, limit);
                    x[d] + v[d]
                })
                .collect();
            out.push(next);
        }
        out
    }

    fn absorb(&mut self, _ctx: &mut Context<'_>, positions: &[Vec<f64>], fitness: &[f64]) {
        for (i, (p, &f)) in positions.iter().zip(fitness).enumerate() {
            if f > self.personal[i].1 {
                self.personal[i] = (p.clone(), f);
            }
        }
        self.positions = positions.to_vec();
    }
}
