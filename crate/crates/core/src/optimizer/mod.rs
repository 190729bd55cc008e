//! Swarm metaheuristics behind one ask/tell maximization interface.
//!
//! [`Swarm`] owns the population bookkeeping shared by every algorithm:
//! seeded uniform initialization, componentwise clamping into the search
//! box, the ask/tell protocol and the best-so-far record. Each algorithm
//! only supplies its move rules through the [`Strategy`] trait.
//!
//! The first `ask` returns the initial population. Every later `ask`
//! proposes a new generation using the schedules evaluated at
//! `t = completed tells`, against a horizon of `max_iterations`.

mod bat;
pub mod bench;
mod cuckoo;
mod gwo;
mod mfo;
mod mvo;
mod pso;
mod woa;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bat::BatParams;
pub use cuckoo::{levy_step, CuckooParams};
pub use gwo::{gwo_move, GwoParams};
pub use mfo::MfoParams;
pub use mvo::MvoParams;
pub use pso::PsoParams;
pub use woa::WoaParams;

#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error("population size must be at least 2, got {0}")]
    PopulationTooSmall(usize),
    #[error("search box is empty")]
    EmptyBounds,
    #[error("dimension {dim}: low {low} exceeds high {high} or is not finite")]
    DegenerateBounds { dim: usize, low: f64, high: f64 },
    #[error("ask called again before the previous generation was told")]
    AskPending,
    #[error("tell called without a pending ask")]
    NothingToTell,
    #[error("expected {expected} fitness values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("fitness {index} is not finite")]
    NonFiniteFitness { index: usize },
    #[error("unknown optimizer {0:?}; expected one of pso, cs, bat, gwo, mfo, woa, mvo")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Pso,
    Cs,
    Bat,
    Gwo,
    Mfo,
    Woa,
    Mvo,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 7] = [
        OptimizerKind::Pso,
        OptimizerKind::Cs,
        OptimizerKind::Bat,
        OptimizerKind::Gwo,
        OptimizerKind::Mfo,
        OptimizerKind::Woa,
        OptimizerKind::Mvo,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Pso => "pso",
            OptimizerKind::Cs => "cs",
            OptimizerKind::Bat => "bat",
            OptimizerKind::Gwo => "gwo",
            OptimizerKind::Mfo => "mfo",
            OptimizerKind::Woa => "woa",
            OptimizerKind::Mvo => "mvo",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = OptimizerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        let alias = match lower.as_str() {
            "csa" | "cuckoo" => "cs",
            other => other,
        };
        Self::ALL
            .into_iter()
            .find(|k| k.name() == alias)
            .ok_or_else(|| OptimizerError::UnknownKind(s.to_string()))
    }
}

/// Per-algorithm constants; defaults follow each algorithm's original
/// publication.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerParams {
    pub pso: PsoParams,
    pub cs: CuckooParams,
    pub bat: BatParams,
    pub gwo: GwoParams,
    pub mfo: MfoParams,
    pub woa: WoaParams,
    pub mvo: MvoParams,
}

/// Axis-aligned box the population lives in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl SearchBox {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self, OptimizerError> {
        if low.is_empty() || low.len() != high.len() {
            return Err(OptimizerError::EmptyBounds);
        }
        for (dim, (&l, &h)) in low.iter().zip(&high).enumerate() {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(OptimizerError::DegenerateBounds { dim, low: l, high: h });
            }
        }
        Ok(Self { low, high })
    }

    pub fn uniform(dim: usize, low: f64, high: f64) -> Result<Self, OptimizerError> {
        Self::new(vec![low; dim], vec![high; dim])
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn range(&self, d: usize) -> f64 {
        self.high[d] - self.low[d]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(d, v)| *v >= self.low[d] && *v <= self.high[d])
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (d, v) in x.iter_mut().enumerate() {
            // NaN from a degenerate move lands on the lower bound
            *v = if v.is_nan() { self.low[d] } else { v.clamp(self.low[d], self.high[d]) };
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim())
            .map(|d| self.low[d] + rng.random::<f64>() * self.range(d))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub pop_size: usize,
    /// Schedule horizon.
    pub max_iterations: usize,
    pub seed: u64,
    pub params: OptimizerParams,
}

/// Everything a move rule may read while proposing or absorbing.
pub(crate) struct Context<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub bounds: &'a SearchBox,
    /// Fraction of the schedule elapsed, `t / T` clipped to `[0, 1]`.
    pub progress: f64,
    pub iteration: usize,
    pub max_iterations: usize,
    pub best: &'a [f64],
}

pub(crate) trait Strategy: Send + fmt::Debug {
    /// Called once with the evaluated initial population.
    fn initialize(&mut self, positions: &[Vec<f64>], fitness: &[f64]);
    /// Proposes the next generation (unclamped).
    fn propose(&mut self, ctx: &mut Context<'_>) -> Vec<Vec<f64>>;
    /// Receives the clamped proposals and their fitness.
    fn absorb(&mut self, ctx: &mut Context<'_>, positions: &[Vec<f64>], fitness: &[f64]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct Best {
    pub position: Vec<f64>,
    pub fitness: f64,
}

#[derive(Debug)]
pub struct Swarm {
    kind: OptimizerKind,
    config: SwarmConfig,
    bounds: SearchBox,
    rng: ChaCha8Rng,
    strategy: Box<dyn Strategy>,
    pending: Option<Vec<Vec<f64>>>,
    initial: Option<Vec<Vec<f64>>>,
    tells: usize,
    best: Option<Best>,
}

impl Swarm {
    pub fn new(kind: OptimizerKind, bounds: SearchBox, config: SwarmConfig) -> Result<Self, OptimizerError> {
        if config.pop_size < 2 {
            return Err(OptimizerError::PopulationTooSmall(config.pop_size));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let initial: Vec<Vec<f64>> = (0..config.pop_size).map(|_| bounds.sample(&mut rng)).collect();
        let p = config.params;
        let strategy: Box<dyn Strategy> = match kind {
            OptimizerKind::Pso => Box::new(pso::Pso::new(p.pso)),
            OptimizerKind::Cs => Box::new(cuckoo::Cuckoo::new(p.cs)),
            OptimizerKind::Bat => Box::new(bat::Bat::new(p.bat)),
            OptimizerKind::Gwo => Box::new(gwo::Gwo::new(p.gwo)),
            OptimizerKind::Mfo => Box::new(mfo::Mfo::new(p.mfo)),
            OptimizerKind::Woa => Box::new(woa::Woa::new(p.woa)),
            OptimizerKind::Mvo => Box::new(mvo::Mvo::new(p.mvo)),
        };
        Ok(Self {
            kind,
            config,
            bounds,
            rng,
            strategy,
            pending: None,
            initial: Some(initial),
            tells: 0,
            best: None,
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn pop_size(&self) -> usize {
        self.config.pop_size
    }

    pub fn bounds(&self) -> &SearchBox {
        &self.bounds
    }

    /// Completed ask/tell rounds.
    pub fn iteration(&self) -> usize {
        self.tells
    }

    pub fn best(&self) -> Option<&Best> {
        self.best.as_ref()
    }

    /// Positions to evaluate next, each inside the search box.
    pub fn ask(&mut self) -> Result<Vec<Vec<f64>>, OptimizerError> {
        if self.pending.is_some() {
            return Err(OptimizerError::AskPending);
        }
        let mut positions = match self.initial.as_ref() {
            Some(initial) => initial.clone(),
            None => {
                let best = self.best.as_ref().expect("told at least once").position.clone();
                let mut ctx = Context {
                    rng: &mut self.rng,
                    bounds: &self.bounds,
                    progress: progress(self.tells, self.config.max_iterations),
                    iteration: self.tells,
                    max_iterations: self.config.max_iterations,
                    best: &best,
                };
                self.strategy.propose(&mut ctx)
            }
        };
        debug_assert_eq!(positions.len(), self.config.pop_size);
        for p in positions.iter_mut() {
            self.bounds.clamp(p);
        }
        self.pending = Some(positions.clone());
        Ok(positions)
    }

    /// Reports fitness (higher is better) for the last `ask`.
    pub fn tell(&mut self, fitness: &[f64]) -> Result<(), OptimizerError> {
        let Some(positions) = self.pending.as_ref() else {
            return Err(OptimizerError::NothingToTell);
        };
        if fitness.len() != positions.len() {
            return Err(OptimizerError::LengthMismatch {
                expected: positions.len(),
                actual: fitness.len(),
            });
        }
        if let Some(index) = fitness.iter().position(|f| !f.is_finite()) {
            return Err(OptimizerError::NonFiniteFitness { index });
        }
        let positions = self.pending.take().expect("checked above");
        for (p, &f) in positions.iter().zip(fitness) {
            if self.best.as_ref().is_none_or(|b| f > b.fitness) {
                self.best = Some(Best {
                    position: p.clone(),
                    fitness: f,
                });
            }
        }
        if self.initial.take().is_some() {
            self.strategy.initialize(&positions, fitness);
        } else {
            let best = self.best.as_ref().expect("just updated").position.clone();
            let mut ctx = Context {
                rng: &mut self.rng,
                bounds: &self.bounds,
                progress: progress(self.tells, self.config.max_iterations),
                iteration: self.tells,
                max_iterations: self.config.max_iterations,
                best: &best,
            };
            self.strategy.absorb(&mut ctx, &positions, fitness);
        }
        self.tells += 1;
        Ok(())
    }
}

fn progress(t: usize, max: usize) -> f64 {
    if max == 0 {
        1.0
    } else {
        (t as f64 / max as f64).min(1.0)
    }
}

/// Linear interpolation from `start` to `end` over the schedule.
pub fn linear_schedule(start: f64, end: f64, t: usize, max: usize) -> f64 {
    start + (end - start) * progress(t, max)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use proptest::strategy::Strategy;
    use rand::Rng;

    use super::*;

    fn config(pop: usize, iters: usize, seed: u64) -> SwarmConfig {
        SwarmConfig {
            pop_size: pop,
            max_iterations: iters,
            seed,
            params: OptimizerParams::default(),
        }
    }

    fn toy_fitness(p: &[f64]) -> f64 {
        -p.iter().map(|x| (x - 0.3) * (x - 0.3)).sum::<f64>()
    }

    #[test]
    fn parse_kinds() {
        for kind in OptimizerKind::ALL {
            assert_eq!(kind.name().parse::<OptimizerKind>().unwrap(), kind);
            assert_eq!(kind.name().to_uppercase().parse::<OptimizerKind>().unwrap(), kind);
        }
        assert_eq!("CSA".parse::<OptimizerKind>().unwrap(), OptimizerKind::Cs);
        assert!(matches!("ga".parse::<OptimizerKind>(), Err(OptimizerError::UnknownKind(_))));
    }

    #[test]
    fn init_errors() {
        let b = SearchBox::uniform(3, -1.0, 1.0).unwrap();
        assert_eq!(
            Swarm::new(OptimizerKind::Pso, b, config(1, 10, 0)).unwrap_err(),
            OptimizerError::PopulationTooSmall(1)
        );
        assert!(matches!(
            SearchBox::new(vec![0.0, 2.0], vec![1.0, 1.0]),
            Err(OptimizerError::DegenerateBounds { dim: 1, .. })
        ));
    }

    #[test]
    fn protocol_errors() {
        let b = SearchBox::uniform(2, -1.0, 1.0).unwrap();
        let mut s = Swarm::new(OptimizerKind::Gwo, b, config(4, 10, 0)).unwrap();
        assert_eq!(s.tell(&[0.0; 4]), Err(OptimizerError::NothingToTell));
        s.ask().unwrap();
        assert_eq!(s.ask().unwrap_err(), OptimizerError::AskPending);
        assert_eq!(
            s.tell(&[0.0; 3]),
            Err(OptimizerError::LengthMismatch { expected: 4, actual: 3 })
        );
        assert_eq!(
            s.tell(&[0.0, f64::NAN, 0.0, 0.0]),
            Err(OptimizerError::NonFiniteFitness { index: 1 })
        );
        s.tell(&[0.0; 4]).unwrap();
        assert_eq!(s.iteration(), 1);
    }

    #[test]
    fn initial_population_inside_box_for_many_seeds() {
        let b = SearchBox::new(vec![-2.0, 0.5, 10.0], vec![-1.0, 0.5, 20.0]).unwrap();
        for seed in 0..1000 {
            let mut s = Swarm::new(OptimizerKind::ALL[seed as usize % 7], b.clone(), config(5, 10, seed)).unwrap();
            assert!(s.ask().unwrap().iter().all(|p| b.contains(p)));
        }
    }

    #[test]
    fn same_seed_same_population() {
        let b = SearchBox::uniform(4, -1.0, 1.0).unwrap();
        for kind in OptimizerKind::ALL {
            let mut a = Swarm::new(kind, b.clone(), config(6, 10, 9)).unwrap();
            let mut c = Swarm::new(kind, b.clone(), config(6, 10, 9)).unwrap();
            for _ in 0..5 {
                let (pa, pc) = (a.ask().unwrap(), c.ask().unwrap());
                assert_eq!(pa, pc);
                let f: Vec<f64> = pa.iter().map(|p| toy_fitness(p)).collect();
                a.tell(&f).unwrap();
                c.tell(&f).unwrap();
            }
        }
    }

    #[test]
    fn worse_fitness_keeps_best() {
        let b = SearchBox::uniform(2, -1.0, 1.0).unwrap();
        for kind in OptimizerKind::ALL {
            let mut s = Swarm::new(kind, b.clone(), config(3, 10, 1)).unwrap();
            s.ask().unwrap();
            s.tell(&[1.0, 5.0, 2.0]).unwrap();
            let best = s.best().unwrap().clone();
            assert_eq!(best.fitness, 5.0);
            s.ask().unwrap();
            s.tell(&[4.0, 4.9, -1.0]).unwrap();
            assert_eq!(s.best().unwrap(), &best);
            let next = s.ask().unwrap();
            s.tell(&[0.0, 7.5, 0.0]).unwrap();
            assert_eq!(s.best().unwrap().fitness, 7.5);
            assert_eq!(s.best().unwrap().position, next[1]);
        }
    }

    #[test]
    fn schedule_endpoints() {
        assert_eq!(linear_schedule(0.9, 0.4, 0, 10), 0.9);
        assert_eq!(linear_schedule(0.9, 0.4, 10, 10), 0.4);
        assert_eq!(linear_schedule(2.0, 0.0, 0, 300), 2.0);
        assert_eq!(linear_schedule(2.0, 0.0, 300, 300), 0.0);
        let p = OptimizerParams::default();
        assert_eq!(p.pso.inertia(0, 10), 0.9);
        assert_eq!(p.pso.inertia(10, 10), 0.4);
        assert_eq!(p.gwo.control(0, 10), 2.0);
        assert_eq!(p.gwo.control(10, 10), 0.0);
        assert_eq!(p.woa.control(0, 10), 2.0);
        assert_eq!(p.woa.control(10, 10), 0.0);
        assert_eq!(p.mvo.wep(0, 10), 0.2);
        assert_eq!(p.mvo.wep(10, 10), 1.0);
        assert_eq!(p.mvo.tdr(0, 10), 1.0);
        assert_eq!(p.mvo.tdr(10, 10), 0.0);
    }

    fn random_box() -> impl Strategy<Value = SearchBox> {
        prop::collection::vec((-50.0f64..50.0, 0.0f64..20.0), 1..6)
            .prop_map(|dims| {
                let (low, high): (Vec<f64>, Vec<f64>) = dims.iter().map(|&(l, w)| (l, l + w)).unzip();
                SearchBox::new(low, high).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn positions_stay_in_box_and_best_is_monotone(
            b in random_box(),
            seed in any::<u64>(),
            kind in prop::sample::select(OptimizerKind::ALL.to_vec()),
            pop in 2usize..8,
        ) {
            let mut s = Swarm::new(kind, b.clone(), config(pop, 100, seed)).unwrap();
            let mut last = f64::NEG_INFINITY;
            let mut noise = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
            for _ in 0..100 {
                let positions = s.ask().unwrap();
                prop_assert_eq!(positions.len(), pop);
                prop_assert!(positions.iter().all(|p| b.contains(p)));
                // rugged fitness with ties and plateaus
                let f: Vec<f64> = positions
                    .iter()
                    .map(|p| (toy_fitness(p) * 3.0).round() + noise.random_range(0.0..0.5))
                    .collect();
                s.tell(&f).unwrap();
                let best = s.best().unwrap().fitness;
                prop_assert!(best >= last);
                last = best;
            }
        }
    }
}
