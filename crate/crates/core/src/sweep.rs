//! Parameter sweeps over protocol and nested-chain models, written as CSV.
//!
//! A sweep spec names a protocol, one or more linear grids, fixed values
//! for the remaining parameters and the metrics to report. Rows follow the
//! lexicographic order of the grid (first axis outermost).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::estimators::{estimate_latency, nested_throughput, visit_count_variance, NestedMethod};
use crate::markov::DEFAULT_EQUILIBRIUM_TOL;
use crate::protocol::ProtocolParams;
use crate::simulator::{simulate_chain, simulate_nested, SimConfig};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepProtocol {
    Multiherald,
    Shs,
    Dhs,
    Nested,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Equilibrium probability of the success state.
    Equilibrium,
    /// Mean latency from the start state, in time units.
    MeanLatency,
    /// Latency standard deviation over mean latency.
    LatencyStdOverMean,
    /// `N tau^2 Var[T]` with steps treated as independent: `pi_S (1 - pi_S)`.
    NaiveVar,
    /// `N tau^2 Var[T]` at the spec's horizon, covariances included.
    ExactVar,
    NestedType1,
    NestedType2,
    /// Monte Carlo mean throughput per elementary step.
    SimulatedMean,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Equilibrium => "equilibrium",
            Metric::MeanLatency => "mean_latency",
            Metric::LatencyStdOverMean => "latency_std_over_mean",
            Metric::NaiveVar => "naive_var",
            Metric::ExactVar => "exact_var",
            Metric::NestedType1 => "nested_type1",
            Metric::NestedType2 => "nested_type2",
            Metric::SimulatedMean => "simulated_mean",
        }
    }

    fn applies_to(self, protocol: SweepProtocol) -> bool {
        match self {
            Metric::NestedType1 | Metric::NestedType2 => protocol == SweepProtocol::Nested,
            Metric::SimulatedMean => true,
            _ => protocol != SweepProtocol::Nested,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| if i + 1 == self.count { self.stop } else { self.start + step * i as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    #[serde(default = "default_steps")]
    pub steps: u64,
    #[serde(default = "default_trajectories")]
    pub trajectories: u64,
    #[serde(default)]
    pub seed: u64,
}

fn default_steps() -> u64 {
    100_000
}

fn default_trajectories() -> u64 {
    1_000
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { steps: default_steps(), trajectories: default_trajectories(), seed: 0 }
    }
}

fn default_horizon() -> u64 {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub protocol: SweepProtocol,
    pub varied_params: Vec<GridAxis>,
    #[serde(default)]
    pub fixed_params: BTreeMap<String, f64>,
    pub outputs: Vec<Metric>,
    /// Horizon `N` for `exact_var`.
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default)]
    pub simulation: Option<SimSettings>,
}

/// Header plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn spec_error(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        let spec: SweepSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.varied_params.is_empty() {
            return Err(spec_error("at least one varied parameter is required"));
        }
        if self.outputs.is_empty() {
            return Err(spec_error("at least one output metric is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for axis in &self.varied_params {
            if axis.count < 2 {
                return Err(spec_error(format!("grid {} needs count >= 2", axis.name)));
            }
            if !axis.start.is_finite() || !axis.stop.is_finite() {
                return Err(spec_error(format!("grid {} has a non-finite bound", axis.name)));
            }
            if !seen.insert(axis.name.as_str()) || self.fixed_params.contains_key(&axis.name) {
                return Err(spec_error(format!("parameter {} given more than once", axis.name)));
            }
        }
        for name in seen.iter().copied().chain(self.fixed_params.keys().map(String::as_str)) {
            if !known_param(self.protocol, name) {
                return Err(spec_error(format!("unknown parameter {name} for {:?}", self.protocol)));
            }
        }
        if let Some(m) = self.outputs.iter().find(|m| !m.applies_to(self.protocol)) {
            return Err(spec_error(format!("metric {} does not apply to {:?}", m.name(), self.protocol)));
        }
        if self.horizon == 0 {
            return Err(spec_error("horizon must be at least 1"));
        }
        if let Some(sim) = &self.simulation {
            SimConfig::new(sim.steps, sim.trajectories, sim.seed).validate()?;
        }
        Ok(())
    }

    /// Grid points in row order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self.varied_params.iter().map(GridAxis::values).collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    axis.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        out
    }

    pub fn header(&self) -> Vec<String> {
        self.varied_params
            .iter()
            .map(|a| a.name.clone())
            .chain(self.outputs.iter().map(|m| m.name().to_string()))
            .collect()
    }

    pub fn run(&self) -> Result<SweepTable, Error> {
        self.validate()?;
        let points = self.points();
        let rows = points
            .par_iter()
            .enumerate()
            .map(|(index, point)| {
                let mut values: BTreeMap<String, f64> = self.fixed_params.clone();
                for (axis, &v) in self.varied_params.iter().zip(point) {
                    values.insert(axis.name.clone(), v);
                }
                let metrics = self.evaluate(&values, index as u64)?;
                let row: Vec<f64> = point.iter().copied().chain(metrics).collect();
                if let Some(bad) = row.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Numerical(format!(
                        "non-finite {} at grid point {index} ({values:?})",
                        self.header()[bad]
                    )));
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>, Error>>()?;
        Ok(SweepTable { header: self.header(), rows })
    }

    fn sim_config(&self, point_index: u64) -> SimConfig {
        let s = self.simulation.clone().unwrap_or_default();
        SimConfig::new(s.steps, s.trajectories, s.seed.wrapping_add(point_index))
    }

    fn evaluate(&self, values: &BTreeMap<String, f64>, point_index: u64) -> Result<Vec<f64>, Error> {
        if self.protocol == SweepProtocol::Nested {
            return self.evaluate_nested(values, point_index);
        }
        let params = protocol_params(self.protocol, values)?;
        let chain = params.build()?;
        let mut out = Vec::with_capacity(self.outputs.len());
        let pi_s = || -> Result<f64, Error> {
            Ok(chain.matrix().equilibrium(DEFAULT_EQUILIBRIUM_TOL)?.probs()[chain.success_state()])
        };
        for metric in &self.outputs {
            let v = match metric {
                Metric::Equilibrium => pi_s()?,
                Metric::MeanLatency => estimate_latency(&chain)?.mean,
                Metric::LatencyStdOverMean => estimate_latency(&chain)?.std_over_mean(),
                Metric::NaiveVar => {
                    let p = pi_s()?;
                    p * (1.0 - p)
                }
                Metric::ExactVar => {
                    visit_count_variance(chain.matrix(), chain.start_state(), chain.success_state(), self.horizon)
                        / self.horizon as f64
                }
                Metric::SimulatedMean => simulate_chain(&chain, &self.sim_config(point_index))?.mean_throughput,
                Metric::NestedType1 | Metric::NestedType2 => unreachable!("rejected by validate"),
            };
            out.push(v);
        }
        Ok(out)
    }

    fn evaluate_nested(&self, values: &BTreeMap<String, f64>, point_index: u64) -> Result<Vec<f64>, Error> {
        let p = *values.get("p").ok_or_else(|| spec_error("nested sweep needs p"))?;
        let k_raw = *values.get("k").ok_or_else(|| spec_error("nested sweep needs k"))?;
        let k = k_raw.round();
        if (k - k_raw).abs() > 1e-9 || k < 1.0 {
            return Err(spec_error(format!("k = {k_raw} is not a positive integer")));
        }
        let k = k as u32;
        self.outputs
            .iter()
            .map(|metric| match metric {
                Metric::NestedType1 => Ok(nested_throughput(p, k, NestedMethod::Type1)?.rate()),
                Metric::NestedType2 => Ok(nested_throughput(p, k, NestedMethod::Type2)?.rate()),
                Metric::SimulatedMean => Ok(simulate_nested(k, p, &self.sim_config(point_index))?.mean_throughput),
                _ => unreachable!("rejected by validate"),
            })
            .collect()
    }
}

fn known_param(protocol: SweepProtocol, name: &str) -> bool {
    match protocol {
        SweepProtocol::Multiherald => {
            name == "tau" || name.strip_prefix('p').is_some_and(|d| d.parse::<usize>().is_ok_and(|i| i >= 1))
        }
        SweepProtocol::Shs => matches!(name, "pl" | "pr" | "ps" | "tau"),
        SweepProtocol::Dhs => {
            matches!(name, "pl1" | "pl2" | "pr1" | "pr2" | "ps" | "tau" | "p1" | "p2" | "pl" | "pr")
        }
        SweepProtocol::Nested => matches!(name, "k" | "p"),
    }
}

fn require(values: &BTreeMap<String, f64>, name: &str) -> Result<f64, Error> {
    values.get(name).copied().ok_or_else(|| spec_error(format!("parameter {name} is not set")))
}

/// Resolves a flat name -> value map into protocol parameters.
///
/// `multiherald` takes `p1..pn`; `shs` takes `pl`, `pr`, `ps` (default 1);
/// `dhs` takes `pl1`, `pl2`, `pr1`, `pr2`, `ps`, with shorthands `p1`/`p2`
/// (same round on both links) and `pl`/`pr` (both rounds of one link).
/// Explicit names override shorthands. `tau` defaults to 1.
pub fn protocol_params(protocol: SweepProtocol, values: &BTreeMap<String, f64>) -> Result<ProtocolParams, Error> {
    let tau = values.get("tau").copied().unwrap_or(1.0);
    let ps = values.get("ps").copied().unwrap_or(1.0);
    match protocol {
        SweepProtocol::Multiherald => {
            let n = values.keys().filter(|k| k.as_str() != "tau").count();
            let round_probs = (1..=n).map(|i| require(values, &format!("p{i}"))).collect::<Result<_, _>>()?;
            Ok(ProtocolParams::Multiherald { round_probs, tau })
        }
        SweepProtocol::Shs => Ok(ProtocolParams::Shs {
            left_probs: vec![require(values, "pl")?],
            right_probs: vec![require(values, "pr")?],
            swap_prob: ps,
            tau,
        }),
        SweepProtocol::Dhs => {
            let mut resolved: BTreeMap<&str, f64> = BTreeMap::new();
            let aliases: [(&str, [&str; 2]); 4] =
                [("p1", ["pl1", "pr1"]), ("p2", ["pl2", "pr2"]), ("pl", ["pl1", "pl2"]), ("pr", ["pr1", "pr2"])];
            for (alias, targets) in aliases {
                if let Some(&v) = values.get(alias) {
                    for t in targets {
                        resolved.insert(t, v);
                    }
                }
            }
            for name in ["pl1", "pl2", "pr1", "pr2"] {
                if let Some(&v) = values.get(name) {
                    resolved.insert(name, v);
                }
            }
            let get = |n: &str| {
                resolved.get(n).copied().ok_or_else(|| spec_error(format!("parameter {n} is not set")))
            };
            Ok(ProtocolParams::Dhs {
                left_probs: vec![get("pl1")?, get("pl2")?],
                right_probs: vec![get("pr1")?, get("pr2")?],
                swap_prob: ps,
                tau,
            })
        }
        SweepProtocol::Nested => Err(spec_error("nested sweeps have no protocol chain")),
    }
}

/// Seventeen significant digits in scientific notation.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&v| format_value(v)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes to a temporary file next to `path`, then renames it into place.
pub fn write_atomically<F>(path: &Path, fill: F) -> Result<(), Error>
where
    F: FnOnce(&mut std::fs::File) -> Result<(), Error>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    fill(tmp.as_file_mut())?;
    tmp.as_file_mut().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}
