//! Seeded Monte Carlo engines.
//!
//! Each trajectory owns a ChaCha8 stream keyed by `(seed, trajectory index)`,
//! so results do not depend on how trajectories are scheduled across threads.

mod nested;

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::ProtocolChain;

pub use nested::{NestedChainState, RegenerationPolicy, Segment, MAX_NESTED_LEVEL};

/// Identifier of the only supported generator.
pub const RNG_ALGORITHM: &str = "chacha8-stream-per-trajectory";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{0} must be at least 1")]
    ZeroCount(&'static str),
    #[error("unsupported rng algorithm {0:?}")]
    UnknownRng(String),
    #[error("{name} = {value} is out of range")]
    ArgumentOutOfRange { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub steps_per_trajectory: u64,
    pub trajectories: u64,
    pub seed: u64,
    pub rng_algorithm: String,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            steps_per_trajectory: 100_000,
            trajectories: 1_000,
            seed: 0,
            rng_algorithm: RNG_ALGORITHM.to_string(),
        }
    }
}

impl SimConfig {
    pub fn new(steps_per_trajectory: u64, trajectories: u64, seed: u64) -> Self {
        Self { steps_per_trajectory, trajectories, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.steps_per_trajectory == 0 {
            return Err(SimError::ZeroCount("steps_per_trajectory"));
        }
        if self.trajectories == 0 {
            return Err(SimError::ZeroCount("trajectories"));
        }
        if self.rng_algorithm != RNG_ALGORITHM {
            return Err(SimError::UnknownRng(self.rng_algorithm.clone()));
        }
        Ok(())
    }

    pub(crate) fn rng_for(&self, trajectory: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trajectory);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub success_counts: Vec<u64>,
    /// Successes per elementary step, averaged over trajectories.
    pub mean_throughput: f64,
    /// Sample variance of the per-trajectory throughput.
    pub throughput_variance: f64,
    pub config_echo: SimConfig,
    /// Seconds.
    pub wall_time: f64,
}

impl SimulationResult {
    fn from_counts(success_counts: Vec<u64>, config: &SimConfig, started: Instant) -> Self {
        let steps = config.steps_per_trajectory as f64;
        let m = success_counts.len() as f64;
        let rates = success_counts.iter().map(|&c| c as f64 / steps);
        let mean = rates.clone().sum::<f64>() / m;
        let variance = if success_counts.len() > 1 {
            rates.map(|r| (r - mean) * (r - mean)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        Self {
            success_counts,
            mean_throughput: mean,
            throughput_variance: variance,
            config_echo: config.clone(),
            wall_time: started.elapsed().as_secs_f64(),
        }
    }

    /// Standard error of `mean_throughput` from the spread across trajectories.
    pub fn standard_error(&self) -> f64 {
        (self.throughput_variance / self.success_counts.len() as f64).sqrt()
    }

    pub fn total_successes(&self) -> u64 {
        self.success_counts.iter().sum()
    }

    /// One row per trajectory: `trajectory_index,success_count`.
    pub fn write_counts_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["trajectory_index", "success_count"])?;
        for (i, c) in self.success_counts.iter().enumerate() {
            w.write_record([i.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn run_trajectories<F>(config: &SimConfig, run: F) -> Result<SimulationResult, SimError>
where
    F: Fn(&mut ChaCha8Rng) -> u64 + Sync,
{
    config.validate()?;
    let started = Instant::now();
    let counts: Vec<u64> = (0..config.trajectories)
        .into_par_iter()
        .map(|t| run(&mut config.rng_for(t)))
        .collect();
    Ok(SimulationResult::from_counts(counts, config, started))
}

/// Walks `chain` from its start state and counts visits to the success state
/// in steps `1..=steps`.
pub fn simulate_chain(chain: &ProtocolChain, config: &SimConfig) -> Result<SimulationResult, SimError> {
    let matrix = chain.matrix();
    let n = matrix.n();
    // cumulative rows; the last nonzero column absorbs rounding
    let cumulative: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            let mut row: Vec<(usize, f64)> = (0..n)
                .filter(|&j| matrix.get(i, j) > 0.0)
                .map(|j| {
                    acc += matrix.get(i, j);
                    (j, acc)
                })
                .collect();
            if let Some(last) = row.last_mut() {
                last.1 = f64::INFINITY;
            }
            row
        })
        .collect();
    let success = chain.success_state();
    let start = chain.start_state();
    let steps = config.steps_per_trajectory;
    run_trajectories(config, |rng| {
        let mut state = start;
        let mut count = 0;
        for _ in 0..steps {
            let row = &cumulative[state];
            state = if row.len() == 1 {
                row[0].0
            } else {
                let u: f64 = rng.random();
                row.iter().find(|&&(_, c)| u < c).expect("last bound is infinite").0
            };
            if state == success {
                count += 1;
            }
        }
        count
    })
}

/// `k`-level nested chain of `2^k` single-heralded links with deterministic
/// swaps; see [`NestedChainState`] for the step semantics.
pub fn simulate_nested(k: u32, p: f64, config: &SimConfig) -> Result<SimulationResult, SimError> {
    simulate_nested_with(k, p, config, RegenerationPolicy::default())
}

pub fn simulate_nested_with(
    k: u32,
    p: f64,
    config: &SimConfig,
    policy: RegenerationPolicy,
) -> Result<SimulationResult, SimError> {
    if k == 0 || k > MAX_NESTED_LEVEL {
        return Err(SimError::ArgumentOutOfRange { name: "k", value: k as f64 });
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(SimError::ArgumentOutOfRange { name: "p", value: p });
    }
    let steps = config.steps_per_trajectory;
    run_trajectories(config, |rng| {
        let mut state = NestedChainState::new(k, policy);
        let mut count = 0;
        for _ in 0..steps {
            if state.step(p, rng) {
                count += 1;
            }
            #[cfg(debug_assertions)]
            if k <= 3 && steps <= 10_000 {
                state.check_invariants().expect("nested chain invariant");
            }
        }
        count
    })
}
