//! Multi-verse optimizer.
//!
//! Universes exchange components through white/black hole tunnels: worse
//! universes are more likely to receive, and donors are picked by a
//! roulette wheel favouring better universes. Wormholes then teleport
//! components around the best universe with probability WEP (wormhole
//! existence probability) within a radius set by TDR (travelling distance
//! rate).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{linear_schedule, Context, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MvoParams {
    pub wep_min: f64,
    pub wep_max: f64,
    /// Exploitation accuracy exponent of the TDR schedule.
    pub tdr_exponent: f64,
}

impl Default for MvoParams {
    fn default() -> Self {
        Self {
            wep_min: 0.2,
            wep_max: 1.0,
            tdr_exponent: 6.0,
        }
    }
}

impl MvoParams {
    pub fn wep(&self, t: usize, max: usize) -> f64 {
        linear_schedule(self.wep_min, self.wep_max, t, max)
    }

    /// `1 - (t / T)^(1/p)`
    pub fn tdr(&self, t: usize, max: usize) -> f64 {
        if max == 0 {
            return 0.0;
        }
        let frac = (t as f64 / max as f64).min(1.0);
        1.0 - frac.powf(1.0 / self.tdr_exponent)
    }
}

#[derive(Debug)]
pub(crate) struct Mvo {
    params: MvoParams,
    universes: Vec<Vec<f64>>,
    fitness: Vec<f64>,
}

impl Mvo {
    pub fn new(params: MvoParams) -> Self {
        Self {
            params,
            universes: Vec::new(),
            fitness: Vec::new(),
        }
    }
}

impl Strategy for Mvo {
    fn initialize(&mut self, positions: &[Vec<f64>], fitness: &[f64]) {
        self.universes = positions.to_vec();
        self.fitness = fitness.to_vec();
    }

    fn propose(&mut self, ctx: &mut Context<'_>) -> Vec<Vec<f64>> {
        let wep = self.params.wep(ctx.iteration, ctx.max_iterations);
        let tdr = self.params.tdr(ctx.iteration, ctx.max_iterations);
        let (lo, hi) = self
            .fitness
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &f| (l.min(f), h.max(f)));
        let spread = hi - lo;
        // inflation rates in [0, 1], higher for better universes
        let inflation: Vec<f64> = self
            .fitness
            .iter()
            .map(|f| if spread > 0.0 { (f - lo) / spread } else { 1.0 })
            .collect();
        let wheel_total: f64 = inflation.iter().map(|v| v + 1e-12).sum();

        let mut out = self.universes.clone();
        for (i, universe) in out.iter_mut().enumerate() {
            let receive = 1.0 - inflation[i];
            for d in 0..universe.len() {
                if ctx.rng.random::<f64>() < receive {
                    let mut ticket = ctx.rng.random::<f64>() * wheel_total;
                    let mut donor = inflation.len() - 1;
                    for (k, v) in inflation.iter().enumerate() {
                        ticket -= v + 1e-12;
                        if ticket <= 0.0 {
                            donor = k;
                            break;
                        }
                    }
                    universe[d] = self.universes[donor][d];
                }
                if ctx.rng.random::<f64>() < wep {
                    let offset = tdr * ctx.bounds.range(d) * ctx.rng.random::<f64>();
                    universe[d] = if ctx.rng.random::<f64>() < 0.5 {
                        ctx.best[d] + offset
                    } else {
                        ctx.best[d] - offset
                    };
                }
            }
        }
        out
    }

    fn absorb(&mut self, _ctx: &mut Context<'_>, positions: &[Vec<f64>], fitness: &[f64]) {
        self.universes = positions.to_vec();
        self.fitness = fitness.to_vec();
    }
}
