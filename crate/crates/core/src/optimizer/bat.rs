//! Bat algorithm.
//!
//! Each bat carries a velocity, a loudness `A` and a pulse emission rate
//! `r`. A trial position comes from a frequency-tuned velocity step, or,
//! with probability `1 - r`, from a local walk around the best bat scaled
//! by the mean loudness. A trial replaces the bat's position only when it
//! is strictly better and a uniform draw falls below the bat's loudness;
//! on acceptance `A` shrinks by `alpha` and `r` grows towards its ceiling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Context, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatParams {
    pub initial_loudness: f64,
    /// Ceiling of the pulse emission rate.
    pub pulse_rate: f64,
    pub freq_min: f64,
    pub freq_max: f64,
    /// Loudness decay on acceptance.
    pub alpha: f64,
    /// Pulse-rate growth constant.
    pub gamma: f64,
    /// Local walk radius as a fraction of each dimension's range.
    pub local_scale: f64,
}

impl Default for BatParams {
    fn default() -> Self {
        Self {
            initial_loudness: 0.5,
            pulse_rate: 0.5,
            freq_min: 0.0,
            freq_max: 2.0,
            alpha: 0.9,
            gamma: 0.9,
            local_scale: 0.1,
        }
    }
}

impl BatParams {
    /// Pulse rate after `accepted` accepted moves.
    pub fn pulse_after(&self, accepted: usize) -> f64 {
        self.pulse_rate * (1.0 - (-self.gamma * (accepted as f64 + 1.0)).exp())
    }
}

#[derive(Debug, Clone)]
struct BatState {
    position: Vec<f64>,
    fitness: f64,
    velocity: Vec<f64>,
    loudness: f64,
    pulse: f64,
    accepted: usize,
}

#[derive(Debug)]
pub(crate) struct Bat {
    params: BatParams,
    bats: Vec<BatState>,
}

impl Bat {
    pub fn new(params: BatParams) -> Self {
        Self {
            params,
            bats: Vec::new(),
        }
    }
}

impl Strategy for Bat {
    fn initialize(&mut self, positions: &[Vec<f64>], fitness: &[f64]) {
        self.bats = positions
            .iter()
            .zip(fitness)
            .map(|(p, &f)| BatState {
                position: p.clone(),
                fitness: f,
                velocity: vec![0.0; p.len()],
                loudness: self.params.initial_loudness,
                pulse: self.params.pulse_after(0),
                accepted: 0,
            })
            .collect();
    }

    fn propose(&mut self, ctx: &mut Context<'_>) -> Vec<Vec<f64>> {
        let mean_loudness = self.bats.iter().map(|b| b.loudness).sum::<f64>() / self.bats.len() as f64;
        let p = self.params;
        self.bats
            .iter_mut()
            .map(|bat| {
                let freq = p.freq_min + (p.freq_max - p.freq_min) * ctx.rng.random::<f64>();
                let mut trial: Vec<f64> = (0..bat.position.len())
                    .map(|d| {
                        bat.velocity[d] += (bat.position[d] - ctx.best[d]) * freq;
                        bat.position[d] + bat.velocity[d]
                    })
                    .collect();
                if ctx.rng.random::<f64>() > bat.pulse {
                    for (d, t) in trial.iter_mut().enumerate() {
                        let eps: f64 = ctx.rng.random_range(-1.0..1.0);
                        *t = ctx.best[d] + eps * mean_loudness * p.local_scale * ctx.bounds.range(d);
                    }
                }
                trial
            })
            .collect()
    }

    fn absorb(&mut self, ctx: &mut Context<'_>, positions: &[Vec<f64>], fitness: &[f64]) {
        for (bat, (p, &f)) in self.bats.iter_mut().zip(positions.iter().zip(fitness)) {
            let draw: f64 = ctx.rng.random();
            if f > bat.fitness && draw < bat.loudness {
                bat.position = p.clone();
                bat.fitness = f;
                bat.loudness *= self.params.alpha;
                bat.accepted += 1;
                bat.pulse = self.params.pulse_after(bat.accepted);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::optimizer::SearchBox;

    fn step(bat: &mut Bat, trial: &[Vec<f64>], fitness: &[f64]) {
        let bounds = SearchBox::uniform(1, -1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let best = [0.0];
        let mut ctx = Context {
            rng: &mut rng,
            bounds: &bounds,
            progress: 0.1,
            iteration: 1,
            max_iterations: 10,
            best: &best,
        };
        bat.absorb(&mut ctx, trial, fitness);
    }

    #[test]
    fn loudness_and_pulse_change_only_on_acceptance() {
        // loudness 1 makes every strictly better trial accepted
        let params = BatParams {
            initial_loudness: 1.0,
            ..BatParams::default()
        };
        let mut bat = Bat::new(params);
        bat.initialize(&[vec![0.5], vec![-0.5]], &[1.0, 2.0]);
        let r0 = bat.bats[0].pulse;
        assert!((r0 - 0.5 * (1.0 - (-0.9f64).exp())).abs() < 1e-15);

        step(&mut bat, &[vec![0.4], vec![-0.6]], &[1.5, 2.0]);
        // bat 0 improved: A = 1 * 0.9, r = 0.5 (1 - e^{-1.8})
        assert_eq!(bat.bats[0].loudness, 0.9);
        assert!((bat.bats[0].pulse - 0.5 * (1.0 - (-1.8f64).exp())).abs() < 1e-15);
        assert!(bat.bats[0].pulse > r0);
        assert_eq!(bat.bats[0].position, vec![0.4]);
        // bat 1 tied: nothing changes
        assert_eq!(bat.bats[1].loudness, 1.0);
        assert_eq!(bat.bats[1].pulse, r0);
        assert_eq!(bat.bats[1].position, vec![-0.5]);

        step(&mut bat, &[vec![0.3], vec![-0.7]], &[0.0, 1.0]);
        assert_eq!(bat.bats[0].loudness, 0.9);
        assert_eq!(bat.bats[1].loudness, 1.0);
    }

    #[test]
    fn silent_bat_rejects_improvements() {
        let params = BatParams {
            initial_loudness: 0.0,
            ..BatParams::default()
        };
        let mut bat = Bat::new(params);
        bat.initialize(&[vec![0.5]], &[1.0]);
        let before = bat.bats[0].pulse;
        step(&mut bat, &[vec![0.1]], &[9.0]);
        assert_eq!(bat.bats[0].position, vec![0.5]);
        assert_eq!(bat.bats[0].pulse, before);
        assert_eq!(bat.bats[0].accepted, 0);
    }
}
