//! Benchmark harness for validating the optimizers on analytic functions.
//!
//! Objectives are minimized; the harness negates them into the swarm's
//! maximization interface and reports values on the original scale.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{OptimizerError, OptimizerKind, OptimizerParams, SearchBox, Swarm, SwarmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Sphere,
    Rastrigin,
    Rosenbrock,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::Sphere, Objective::Rastrigin, Objective::Rosenbrock];

    pub fn name(&self) -> &'static str {
        match self {
            Objective::Sphere => "sphere",
            Objective::Rastrigin => "rastrigin",
            Objective::Rosenbrock => "rosenbrock",
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Objective::Sphere => x.iter().map(|v| v * v).sum(),
            Objective::Rastrigin => {
                10.0 * x.len() as f64
                    + x.iter()
                        .map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos())
                        .sum::<f64>()
            }
            Objective::Rosenbrock => x
                .windows(2)
                .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
                .sum(),
        }
    }

    /// Conventional symmetric search interval per coordinate.
    pub fn interval(&self) -> (f64, f64) {
        match self {
            Objective::Sphere | Objective::Rastrigin => (-5.12, 5.12),
            Objective::Rosenbrock => (-2.048, 2.048),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|o| o.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown objective {s:?}; expected sphere, rastrigin or rosenbrock"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    /// Best objective value after the initial population and after each
    /// of the `iters` updates (`iters + 1` entries, non-increasing).
    pub trajectory: Vec<f64>,
}

impl SeedRun {
    pub fn best(&self) -> f64 {
        *self.trajectory.last().expect("trajectory is never empty")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub kind: OptimizerKind,
    pub objective: Objective,
    pub dim: usize,
    pub pop: usize,
    pub iters: usize,
    pub runs: Vec<SeedRun>,
}

impl BenchmarkResult {
    pub fn median_best(&self) -> f64 {
        let mut bests: Vec<f64> = self.runs.iter().map(SeedRun::best).collect();
        bests.sort_by(f64::total_cmp);
        let n = bests.len();
        if n == 0 {
            return f64::NAN;
        }
        if n % 2 == 1 {
            bests[n / 2]
        } else {
            (bests[n / 2 - 1] + bests[n / 2]) / 2.0
        }
    }

    /// `seed,iteration,best_value` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "seed,iteration,best_value")?;
        for run in &self.runs {
            for (i, v) in run.trajectory.iter().enumerate() {
                writeln!(out, "{},{},{:e}", run.seed, i, v)?;
            }
        }
        Ok(())
    }
}

pub fn run_benchmark(
    kind: OptimizerKind,
    objective: Objective,
    dim: usize,
    pop: usize,
    iters: usize,
    seeds: &[u64],
    params: OptimizerParams,
) -> Result<BenchmarkResult, OptimizerError> {
    let (lo, hi) = objective.interval();
    let bounds = SearchBox::uniform(dim, lo, hi)?;
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut swarm = Swarm::new(
            kind,
            bounds.clone(),
            SwarmConfig {
                pop_size: pop,
                max_iterations: iters,
                seed,
                params,
            },
        )?;
        let mut trajectory = Vec::with_capacity(iters + 1);
        for _ in 0..=iters {
            let positions = swarm.ask()?;
            let fitness: Vec<f64> = positions.iter().map(|p| -objective.eval(p)).collect();
            swarm.tell(&fitness)?;
            trajectory.push(-swarm.best().expect("told").fitness);
        }
        runs.push(SeedRun { seed, trajectory });
    }
    Ok(BenchmarkResult {
        kind,
        objective,
        dim,
        pop,
        iters,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_optima() {
        assert_eq!(Objective::Sphere.eval(&[0.0; 5]), 0.0);
        assert!(Objective::Rastrigin.eval(&[0.0; 5]).abs() < 1e-12);
        assert_eq!(Objective::Rosenbrock.eval(&[1.0; 5]), 0.0);
        assert_eq!(Objective::Sphere.eval(&[1.0, 2.0]), 5.0);
    }

    #[test]
    fn trajectories_are_monotone_with_expected_length() {
        for kind in OptimizerKind::ALL {
            let result = run_benchmark(kind, Objective::Rastrigin, 3, 8, 25, &[1, 2], OptimizerParams::default()).unwrap();
            for run in &result.runs {
                assert_eq!(run.trajectory.len(), 26);
                assert!(run.trajectory.windows(2).all(|w| w[1] <= w[0]), "{kind}");
            }
        }
    }

    #[test]
    fn csv_layout() {
        let result = run_benchmark(OptimizerKind::Pso, Objective::Sphere, 2, 4, 3, &[7], OptimizerParams::default()).unwrap();
        let mut buf = Vec::new();
        result.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "seed,iteration,best_value");
        assert_eq!(lines.len(), 1 + 4);
        assert!(lines[4].starts_with("7,3,"));
    }

    #[test]
    fn median_of_even_and_odd() {
        let mk = |bests: &[f64]| BenchmarkResult {
            kind: OptimizerKind::Pso,
            objective: Objective::Sphere,
            dim: 1,
            pop: 2,
            iters: 0,
            runs: bests
                .iter()
                .enumerate()
                .map(|(i, b)| SeedRun {
                    seed: i as u64,
                    trajectory: vec![*b],
                })
                .collect(),
        };
        assert_eq!(mk(&[3.0, 1.0, 2.0]).median_best(), 2.0);
        assert_eq!(mk(&[4.0, 1.0, 2.0, 3.0]).median_best(), 2.5);
    }
}
