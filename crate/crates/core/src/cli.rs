//! The `repeaterlab` command line: `analyze`, `sweep`, `simulate`, `compare`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::estimators::{
    estimate_latency, estimate_throughput, mean_latency_from_return_time, nested_throughput, NestedMethod,
};
use crate::markov::DEFAULT_EQUILIBRIUM_TOL;
use crate::protocol::ProtocolParams;
use crate::simulator::{simulate_chain, simulate_nested_with, RegenerationPolicy, SimConfig, SimulationResult};
use crate::sweep::{format_value, write_atomically, SweepSpec};
use crate::Error;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "REPEATERLAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "repeaterlab", version, about = "Throughput and latency of quantum repeater protocols")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Equilibrium, throughput and latency of one protocol chain, as JSON.
    Analyze(AnalyzeArgs),
    /// Evaluate metrics over a parameter grid and write CSV.
    Sweep(SweepArgs),
    /// Monte Carlo run; per-trajectory counts as CSV, summary as JSON.
    Simulate(SimulateArgs),
    /// Analytical estimates next to simulated means, as CSV.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProtocolKind {
    Multiherald,
    Shs,
    Dhs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProtocolArgs {
    /// JSON parameter file; overrides the individual flags.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub protocol: Option<ProtocolKind>,
    /// Per-round success probabilities (multiherald).
    #[arg(long, value_delimiter = ',')]
    pub probs: Vec<f64>,
    /// Left link per-round probabilities.
    #[arg(long, value_delimiter = ',')]
    pub pl: Vec<f64>,
    /// Right link per-round probabilities.
    #[arg(long, value_delimiter = ',')]
    pub pr: Vec<f64>,
    /// Swap success probability.
    #[arg(long, default_value_t = 1.0)]
    pub ps: f64,
    /// Duration of one step.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
}

impl ProtocolArgs {
    fn is_set(&self) -> bool {
        self.params.is_some() || self.protocol.is_some()
    }

    pub fn resolve(&self) -> Result<ProtocolParams, Error> {
        if let Some(path) = &self.params {
            let text = std::fs::read_to_string(path)?;
            return Ok(serde_json::from_str(&text)?);
        }
        let need = |v: &Vec<f64>, flag: &str| {
            if v.is_empty() {
                Err(Error::Validation(format!("--{flag} is required")))
            } else {
                Ok(v.clone())
            }
        };
        match self.protocol {
            None => Err(Error::Validation("either --params or --protocol is required".into())),
            Some(ProtocolKind::Multiherald) => {
                Ok(ProtocolParams::Multiherald { round_probs: need(&self.probs, "probs")?, tau: self.tau })
            }
            Some(ProtocolKind::Shs) => Ok(ProtocolParams::Shs {
                left_probs: need(&self.pl, "pl")?,
                right_probs: need(&self.pr, "pr")?,
                swap_prob: self.ps,
                tau: self.tau,
            }),
            Some(ProtocolKind::Dhs) => Ok(ProtocolParams::Dhs {
                left_probs: need(&self.pl, "pl")?,
                right_probs: need(&self.pr, "pr")?,
                swap_prob: self.ps,
                tau: self.tau,
            }),
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Horizon N for the exact throughput variance.
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Also write the resolved parameters to this JSON file.
    #[arg(long)]
    pub emit_params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Regeneration {
    /// A link regenerates once both of its memories are free.
    #[default]
    FreeMemory,
    /// A link regenerates only after the next end-to-end delivery.
    AfterDelivery,
}

impl From<Regeneration> for RegenerationPolicy {
    fn from(r: Regeneration) -> Self {
        match r {
            Regeneration::FreeMemory => RegenerationPolicy::FreeMemory,
            Regeneration::AfterDelivery => RegenerationPolicy::AfterDelivery,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub protocol: ProtocolArgs,
    /// Simulate a nested chain of 2^k links instead of a protocol chain.
    #[arg(long)]
    pub nested: bool,
    #[arg(long)]
    pub k: Option<u32>,
    /// Elementary link success probability (nested).
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_enum, default_value_t = Regeneration::FreeMemory)]
    pub regeneration: Regeneration,
    #[arg(long, default_value_t = 100_000)]
    pub steps: u64,
    #[arg(long, default_value_t = 1_000)]
    pub trajectories: u64,
    /// Omit for a seed drawn from OS entropy; the seed used is echoed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Per-trajectory success counts.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Summary JSON file; printed to stdout either way.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// CSV destination; stdout if omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// What a simulation run was about.
enum Target {
    Chain(ProtocolParams),
    Nested { k: u32, p: f64, policy: RegenerationPolicy },
}

impl SimArgs {
    fn target(&self) -> Result<Target, Error> {
        if self.nested {
            if self.protocol.is_set() {
                return Err(Error::Validation("--nested cannot be combined with a protocol".into()));
            }
            let k = self.k.ok_or_else(|| Error::Validation("--k is required with --nested".into()))?;
            let p = self.p.ok_or_else(|| Error::Validation("--p is required with --nested".into()))?;
            Ok(Target::Nested { k, p, policy: self.regeneration.into() })
        } else {
            if self.k.is_some() || self.p.is_some() {
                return Err(Error::Validation("--k and --p need --nested".into()));
            }
            Ok(Target::Chain(self.protocol.resolve()?))
        }
    }

    fn config(&self) -> SimConfig {
        let seed = self.seed.unwrap_or_else(rand::random);
        SimConfig::new(self.steps, self.trajectories, seed)
    }
}

fn run_simulation(target: &Target, config: &SimConfig) -> Result<SimulationResult, Error> {
    Ok(match target {
        Target::Chain(params) => simulate_chain(&params.build()?, config)?,
        Target::Nested { k, p, policy } => simulate_nested_with(*k, *p, config, *policy)?,
    })
}

/// Sets the global thread pool size from [`THREADS_ENV`], if present.
pub fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Validation(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Validation(e.to_string()))
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), Error> {
    match cli.command {
        Command::Analyze(args) => {
            let report = analyze(&args)?;
            writeln!(stdout, "{}", serde_json::to_string_pretty(&report)?)?;
        }
        Command::Sweep(args) => {
            let text = std::fs::read_to_string(&args.spec)?;
            let table = SweepSpec::from_json(&text)?.run()?;
            write_atomically(&args.output, |f| table.write_csv(f))?;
        }
        Command::Simulate(args) => {
            let summary = simulate(&args)?;
            writeln!(stdout, "{}", serde_json::to_string_pretty(&summary)?)?;
        }
        Command::Compare(args) => {
            let table = compare(&args)?;
            match &args.output {
                Some(path) => write_atomically(path, |f| Ok(f.write_all(table.as_bytes())?))?,
                None => stdout.write_all(table.as_bytes())?,
            }
        }
    }
    Ok(())
}

fn write_json_file(path: &Path, value: &impl serde::Serialize) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    write_atomically(path, |f| {
        f.write_all(text.as_bytes())?;
        Ok(f.write_all(b"\n")?)
    })
}

pub fn analyze(args: &AnalyzeArgs) -> Result<Value, Error> {
    let params = args.protocol.resolve()?;
    if let Some(path) = &args.emit_params {
        write_json_file(path, &params)?;
    }
    let chain = params.build()?;
    let tau = chain.tau();
    let pi = chain.matrix().equilibrium(DEFAULT_EQUILIBRIUM_TOL)?;
    let pi_s = pi.probs()[chain.success_state()];
    let throughput = estimate_throughput(&chain, args.horizon.unwrap_or(1), args.horizon.is_some())?;
    let latency = estimate_latency(&chain)?;
    let return_time_mean = mean_latency_from_return_time(&chain)?;

    let mut checks = serde_json::Map::new();
    if let Some(cf) = params.closed_form_equilibrium()? {
        checks.insert("equilibrium_closed_form".into(), json!(cf));
        checks.insert("equilibrium_delta".into(), json!(pi_s - cf));
    }
    if let Some(cf) = params.closed_form_latency_variance()? {
        let cf = cf * tau * tau;
        checks.insert("latency_variance_closed_form".into(), json!(cf));
        checks.insert("latency_variance_delta".into(), json!(latency.variance - cf));
    }
    checks.insert("stationarity_residual".into(), json!(chain.matrix().stationarity_residual(pi.probs())));

    let mut throughput_json = json!({
        "mean_rate": throughput.mean_rate,
        "tau": tau,
    });
    if let Some(n) = args.horizon {
        throughput_json["horizon"] = json!(n);
        throughput_json["naive_variance"] = json!(throughput.naive_variance);
        throughput_json["exact_variance"] = json!(throughput.exact_variance);
    } else {
        // N tau^2 Var[T] as N grows, steps treated as independent
        throughput_json["naive_variance_coefficient"] = json!(pi_s * (1.0 - pi_s));
    }

    Ok(json!({
        "params": params,
        "labels": chain.labels(),
        "success_state": chain.labels()[chain.success_state()],
        "start_state": chain.labels()[chain.start_state()],
        "equilibrium": pi.probs(),
        "equilibrium_success": pi_s,
        "throughput": throughput_json,
        "latency": {
            "mean": latency.mean,
            "variance": latency.variance,
            "std_over_mean": latency.std_over_mean(),
            "mean_from_return_time": return_time_mean,
        },
        "cross_checks": checks,
    }))
}

fn describe(target: &Target) -> Value {
    match target {
        Target::Chain(params) => json!(params),
        Target::Nested { k, p, policy } => json!({
            "nested": { "k": k, "p": p, "regeneration": format!("{policy:?}") }
        }),
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<Value, Error> {
    let target = args.sim.target()?;
    let config = args.sim.config();
    let result = run_simulation(&target, &config)?;
    if let Some(path) = &args.csv {
        write_atomically(path, |f| Ok(result.write_counts_csv(f)?))?;
    }
    let summary = json!({
        "model": describe(&target),
        "config": result.config_echo,
        "mean_throughput": result.mean_throughput,
        "throughput_variance": result.throughput_variance,
        "standard_error": result.standard_error(),
        "total_successes": result.total_successes(),
        "wall_time_seconds": result.wall_time,
    });
    if let Some(path) = &args.summary {
        write_json_file(path, &summary)?;
    }
    Ok(summary)
}

/// `|analytical - simulated| / standard_error`; infinite when the runs show
/// no spread but disagree.
pub fn sigma_distance(analytical: f64, simulated: f64, standard_error: f64) -> f64 {
    let diff = (analytical - simulated).abs();
    if standard_error > 0.0 {
        diff / standard_error
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn compare(args: &CompareArgs) -> Result<String, Error> {
    let target = args.sim.target()?;
    let config = args.sim.config();
    let result = run_simulation(&target, &config)?;
    let se = result.standard_error();
    let mut rows: Vec<(&str, f64, f64)> = Vec::new();
    match &target {
        Target::Chain(params) => {
            let chain = params.build()?;
            let pi = chain.matrix().equilibrium(DEFAULT_EQUILIBRIUM_TOL)?;
            rows.push(("mean_throughput", pi.probs()[chain.success_state()], result.mean_throughput));
            if let Some(cf) = params.closed_form_equilibrium()? {
                rows.push(("mean_throughput_closed_form", cf, result.mean_throughput));
            }
        }
        Target::Nested { k, p, .. } => {
            for (name, method) in [("nested_type1", NestedMethod::Type1), ("nested_type2", NestedMethod::Type2)] {
                rows.push((name, nested_throughput(*p, *k, method)?.rate(), result.mean_throughput));
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["quantity", "analytical", "simulated", "standard_error", "sigma_distance"])?;
    for (name, a, s) in rows {
        let d = sigma_distance(a, s, se);
        w.write_record([name.to_string(), format_value(a), format_value(s), format_value(se), format_value(d)])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("repeaterlab").chain(args.iter().copied())).unwrap()
    }

    fn analyze_cmd(args: &[&str]) -> Value {
        match parse(args).command {
            Command::Analyze(a) => analyze(&a).unwrap(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn analyze_examples() {
        let r = analyze_cmd(&["analyze", "--protocol", "multiherald", "--probs", "0.5,0.5"]);
        assert!((r["equilibrium_success"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-12);
        assert!(r["cross_checks"]["equilibrium_delta"].as_f64().unwrap().abs() < 1e-12);

        let r = analyze_cmd(&["analyze", "--protocol", "shs", "--pl", "1", "--pr", "1", "--ps", "1", "--tau", "2.5"]);
        assert!((r["latency"]["mean"].as_f64().unwrap() - 5.0).abs() < 1e-12);
        assert!(r["latency"]["variance"].as_f64().unwrap().abs() < 1e-12);

        let r = analyze_cmd(&["analyze", "--protocol", "dhs", "--pl", "1,1", "--pr", "1,1", "--ps", "1"]);
        assert!((r["equilibrium_success"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(r["cross_checks"].get("equilibrium_delta").is_none());
    }

    #[test]
    fn analyze_with_horizon_reports_exact_variance() {
        let r = analyze_cmd(&["analyze", "--protocol", "multiherald", "--probs", "0.3", "--horizon", "100"]);
        let exact = r["throughput"]["exact_variance"].as_f64().unwrap();
        let naive = r["throughput"]["naive_variance"].as_f64().unwrap();
        // single round: steps are independent
        assert!((exact - naive).abs() < 1e-15);
    }

    #[test]
    fn missing_flags_are_validation_errors() {
        let cases: [&[&str]; 4] = [
            &["analyze"],
            &["analyze", "--protocol", "shs", "--pl", "0.5"],
            &["analyze", "--protocol", "multiherald", "--probs", "1.5"],
            &["analyze", "--protocol", "dhs", "--pl", "0.5", "--pr", "0.5"],
        ];
        for args in cases {
            let Command::Analyze(a) = parse(args).command else { unreachable!() };
            assert_eq!(analyze(&a).unwrap_err().exit_code(), 2, "{args:?}");
        }
    }

    #[test]
    fn emitted_params_reparse() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let p = path.to_str().unwrap();
        let first = analyze_cmd(&["analyze", "--protocol", "dhs", "--pl", "0.3,0.6", "--pr", "0.4,0.9", "--ps", "0.8", "--emit-params", p]);
        let second = analyze_cmd(&["analyze", "--params", p]);
        assert_eq!(first["params"], second["params"]);
        let reparsed: ProtocolParams = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(
            reparsed,
            ProtocolParams::Dhs { left_probs: vec![0.3, 0.6], right_probs: vec![0.4, 0.9], swap_prob: 0.8, tau: 1.0 }
        );
    }

    #[test]
    fn simulate_echoes_seed_and_writes_counts() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("c.csv");
        let cli = parse(&[
            "simulate", "--protocol", "multiherald", "--probs", "1,1,1", "--steps", "9", "--trajectories", "1",
            "--csv", csv.to_str().unwrap(),
        ]);
        let Command::Simulate(a) = cli.command else { unreachable!() };
        let s = simulate(&a).unwrap();
        assert_eq!(s["total_successes"], 3);
        assert!(s["config"]["seed"].is_u64());
        assert_eq!(std::fs::read_to_string(&csv).unwrap(), "trajectory_index,success_count\n0,3\n");
    }

    #[test]
    fn nested_flag_checks() {
        for args in [
            &["simulate", "--nested", "--k", "2"][..],
            &["simulate", "--k", "2", "--p", "0.5", "--protocol", "shs", "--pl", "1", "--pr", "1"][..],
            &["simulate", "--nested", "--k", "2", "--p", "0.5", "--protocol", "shs"][..],
        ] {
            let Command::Simulate(a) = parse(args).command else { unreachable!() };
            assert_eq!(simulate(&a).unwrap_err().exit_code(), 2, "{args:?}");
        }
    }

    #[test]
    fn compare_csv_columns() {
        let cli = parse(&[
            "compare", "--nested", "--k", "1", "--p", "1", "--steps", "10", "--trajectories", "3", "--seed", "0",
        ]);
        let Command::Compare(a) = cli.command else { unreachable!() };
        let text = compare(&a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "quantity,analytical,simulated,standard_error,sigma_distance");
        // p = 1, k = 1: delivery every other step, no spread
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "nested_type1");
        assert_eq!(row[2], format_value(0.5));
        assert_eq!(row[4], format_value(0.0));
    }

    #[test]
    fn sigma_distance_edge_cases() {
        assert_eq!(sigma_distance(0.5, 0.5, 0.0), 0.0);
        assert_eq!(sigma_distance(0.5, 0.4, 0.0), f64::INFINITY);
        assert!((sigma_distance(0.5, 0.4, 0.05) - 2.0).abs() < 1e-12);
    }
}
