//! Throughput and latency estimates for protocol chains, and the recursive
//! throughput estimates for nested repeater chains.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::markov::{MarkovError, StochasticMatrix, DEFAULT_EQUILIBRIUM_TOL};
use crate::protocol::closed_form::shs_equilibrium_raw;
use crate::protocol::{ProtocolChain, ProtocolError};

pub const DEFAULT_HORIZON_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("horizon {horizon} exceeds cap {cap}")]
    HorizonTooLarge { horizon: u64, cap: u64 },
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("{name} = {value} is out of range")]
    ArgumentOutOfRange { name: &'static str, value: f64 },
    #[error("start state never reaches the success state")]
    Unreachable,
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub horizon_cap: u64,
    pub equilibrium_tol: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { horizon_cap: DEFAULT_HORIZON_CAP, equilibrium_tol: DEFAULT_EQUILIBRIUM_TOL }
    }
}

/// Long-run throughput over a horizon of `horizon` steps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThroughputEstimate {
    /// Successes per unit time, `pi_S / tau`.
    pub mean_rate: f64,
    /// `pi_S (1 - pi_S) / (N tau^2)`: steps treated as independent.
    pub naive_variance: f64,
    /// Variance including the covariance between steps.
    pub exact_variance: Option<f64>,
    pub horizon: u64,
    pub tau: f64,
}

/// Time to the first success from the start state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatencyEstimate {
    pub mean: f64,
    pub variance: f64,
}

impl LatencyEstimate {
    pub fn std_over_mean(&self) -> f64 {
        self.variance.max(0.0).sqrt() / self.mean
    }
}

pub fn estimate_throughput(
    chain: &ProtocolChain,
    horizon: u64,
    exact: bool,
) -> Result<ThroughputEstimate, EstimateError> {
    estimate_throughput_with(chain, horizon, exact, &EstimatorConfig::default())
}

pub fn estimate_throughput_with(
    chain: &ProtocolChain,
    horizon: u64,
    exact: bool,
    config: &EstimatorConfig,
) -> Result<ThroughputEstimate, EstimateError> {
    check_horizon(horizon, config)?;
    let pi = chain.matrix().equilibrium(config.equilibrium_tol)?;
    let pi_s = pi.probs()[chain.success_state()];
    let tau = chain.tau();
    let n = horizon as f64;
    let exact_variance = if exact {
        let scaled = visit_count_variance(chain.matrix(), chain.start_state(), chain.success_state(), horizon);
        Some(scaled / (n * n * tau * tau))
    } else {
        None
    };
    Ok(ThroughputEstimate {
        mean_rate: pi_s / tau,
        naive_variance: pi_s * (1.0 - pi_s) / (n * tau * tau),
        exact_variance,
        horizon,
        tau,
    })
}

fn check_horizon(horizon: u64, config: &EstimatorConfig) -> Result<(), EstimateError> {
    if horizon == 0 {
        return Err(EstimateError::ZeroHorizon);
    }
    if horizon > config.horizon_cap {
        return Err(EstimateError::HorizonTooLarge { horizon, cap: config.horizon_cap });
    }
    Ok(())
}

/// `(P^k)_{from, to}` for `k = 1..=horizon`, by repeated vector-matrix products.
pub fn transition_sequence(matrix: &StochasticMatrix, from: usize, to: usize, horizon: u64) -> Vec<f64> {
    let n = matrix.n();
    let mut dist = vec![0.0; n];
    dist[from] = 1.0;
    let mut next = vec![0.0; n];
    let mut out = Vec::with_capacity(horizon as usize);
    for _ in 0..horizon {
        matrix.step_distribution(&dist, &mut next);
        std::mem::swap(&mut dist, &mut next);
        out.push(dist[to]);
    }
    out
}

/// Variance of the number of visits to `success` in steps `1..=horizon`
/// starting from `start`, i.e. `N^2 tau^2 Var[T]`.
///
/// With `a_k = (P^k)_{start,S}` and `b_m = (P^m)_{S,S}`:
/// `sum_k a_k (1 - a_k) + 2 sum_{k<l} (b_{l-k} - a_l) a_k`. The double sum is
/// regrouped as `sum_k a_k B_{N-k}` with prefix sums `B` of `b`, minus
/// `(sum a)^2 - sum a^2`, so the cost is linear in the horizon.
pub fn visit_count_variance(matrix: &StochasticMatrix, start: usize, success: usize, horizon: u64) -> f64 {
    let a = transition_sequence(matrix, start, success, horizon);
    let b = transition_sequence(matrix, success, success, horizon);
    let n = a.len();
    let mut prefix_b = Vec::with_capacity(n + 1);
    prefix_b.push(0.0);
    let mut acc = 0.0;
    for &v in &b {
        acc += v;
        prefix_b.push(acc);
    }
    let mut diag = 0.0;
    let mut sum_a = 0.0;
    let mut sum_a2 = 0.0;
    let mut cross = 0.0;
    for (idx, &ak) in a.iter().enumerate() {
        let k = idx + 1;
        diag += ak * (1.0 - ak);
        sum_a += ak;
        sum_a2 += ak * ak;
        cross += ak * prefix_b[n - k];
    }
    diag + 2.0 * cross - (sum_a * sum_a - sum_a2)
}

/// Mean and variance of the time from the start state to the first success.
pub fn estimate_latency(chain: &ProtocolChain) -> Result<LatencyEstimate, EstimateError> {
    let stats = chain.matrix().hitting_stats(chain.success_state())?;
    let start = chain.start_state();
    let (mean, variance) = stats
        .mean_from(start)
        .zip(stats.variance_from(start))
        .ok_or(EstimateError::Unreachable)?;
    let tau = chain.tau();
    Ok(LatencyEstimate { mean: mean * tau, variance: variance * tau * tau })
}

/// Mean latency through the return time of the success state, `tau / pi_S`.
pub fn mean_latency_from_return_time(chain: &ProtocolChain) -> Result<f64, EstimateError> {
    Ok(chain.tau() * chain.matrix().mean_return_time(chain.success_state())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NestedMethod {
    /// Rescales the previous level's throughput to the current level's swap
    /// duration before feeding it to the two-link formula.
    Type1,
    /// Feeds the previous level's throughput to the two-link formula as is.
    Type2,
}

/// Per-level throughput estimates `T_1 .. T_k` of a nested chain, in units
/// of `1 / tau` of an elementary link.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestedEstimate {
    pub level_k: u32,
    pub per_level_rates: Vec<f64>,
    pub method: NestedMethod,
    /// True if some two-link argument exceeded 1 and was clamped.
    pub clamped: bool,
    /// The rates computed without clamping (identical when `clamped` is false).
    pub unclamped_rates: Vec<f64>,
}

impl NestedEstimate {
    pub fn rate(&self) -> f64 {
        *self.per_level_rates.last().expect("at least one level")
    }
}

/// Two-link equilibrium with deterministic swapping, both links at `x`.
/// Extended by `x (2 - x) / (3 - x^2)` above 1 so unclamped values stay defined.
fn two_link(x: f64) -> f64 {
    if x <= 1.0 {
        shs_equilibrium_raw(x, x, 1.0).expect("x > 0 on this path")
    } else {
        x * (2.0 - x) / (3.0 - x * x)
    }
}

pub fn nested_throughput(p: f64, k: u32, method: NestedMethod) -> Result<NestedEstimate, EstimateError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(EstimateError::ArgumentOutOfRange { name: "p", value: p });
    }
    if k == 0 {
        return Err(EstimateError::ArgumentOutOfRange { name: "k", value: 0.0 });
    }
    let base = two_link(p);
    let mut rates = vec![base];
    let mut unclamped = vec![base];
    let mut clamped = false;
    for level in 2..=k {
        let prev = *rates.last().unwrap();
        let prev_raw = *unclamped.last().unwrap();
        let (next, next_raw) = match method {
            NestedMethod::Type2 => (two_link(prev), two_link(prev_raw)),
            NestedMethod::Type1 => {
                let scale = 2f64.powi(level as i32 - 1);
                let arg = scale * prev;
                if arg > 1.0 {
                    clamped = true;
                }
                (two_link(arg.min(1.0)) / scale, two_link(scale * prev_raw) / scale)
            }
        };
        rates.push(next);
        unclamped.push(next_raw);
    }
    Ok(NestedEstimate { level_k: k, per_level_rates: rates, method, clamped, unclamped_rates: unclamped })
}
